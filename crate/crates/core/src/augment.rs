//! Object-level size augmentations: random object scaling (ROS) and
//! statistical normalization (SN).
//!
//! Both resize a box about its own center and move its interior points with
//! it, scaling them per axis in the box frame. Center and yaw are untouched.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Box7, Point2};

pub const DEFAULT_ROS_RANGE: (f64, f64) = (0.85, 1.15);

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSample {
    pub bbox: Box7,
    pub points: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeStats {
    pub mean_l: f64,
    pub mean_w: f64,
    pub mean_h: f64,
}

impl SizeStats {
    pub fn new(mean_l: f64, mean_w: f64, mean_h: f64) -> Result<Self> {
        let s = Self {
            mean_l,
            mean_w,
            mean_h,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let v = [self.mean_l, self.mean_w, self.mean_h];
        if v.iter().all(|x| x.is_finite() && *x > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("size stats must be positive, got {v:?}")))
        }
    }

    /// Mean dimensions of a set of boxes.
    pub fn from_boxes<'a>(boxes: impl IntoIterator<Item = &'a Box7>) -> Option<Self> {
        let (mut n, mut sum) = (0usize, [0.0; 3]);
        for b in boxes {
            n += 1;
            for (s, d) in sum.iter_mut().zip(b.dims()) {
                *s += d;
            }
        }
        (n > 0).then(|| Self {
            mean_l: sum[0] / n as f64,
            mean_w: sum[1] / n as f64,
            mean_h: sum[2] / n as f64,
        })
    }
}

/// Whether `p` lies inside `b`, with `slack` meters of tolerance per axis.
pub fn point_in_box(b: &Box7, p: [f64; 3], slack: f64) -> bool {
    let local = b.to_local(Point2::new(p[0], p[1]));
    local.x.abs() <= b.l() / 2.0 + slack
        && local.y.abs() <= b.w() / 2.0 + slack
        && (p[2] - b.z()).abs() <= b.h() / 2.0 + slack
}

/// Resizes to `new_dims` about the center, dragging points along.
fn rescale(sample: &ObjectSample, new_dims: [f64; 3]) -> Result<ObjectSample> {
    let b = &sample.bbox;
    let bbox = Box7::new(
        b.x(),
        b.y(),
        b.z(),
        new_dims[0],
        new_dims[1],
        new_dims[2],
        b.theta(),
    )?;
    let [sl, sw, sh] = [0, 1, 2].map(|i| new_dims[i] / b.dims()[i]);
    let points = sample
        .points
        .iter()
        .map(|p| {
            let local = b.to_local(Point2::new(p[0], p[1]));
            let moved = b.from_local(Point2::new(local.x * sl, local.y * sw));
            [moved.x, moved.y, b.z() + (p[2] - b.z()) * sh]
        })
        .collect();
    Ok(ObjectSample { bbox, points })
}

pub fn ros_scale(sample: &ObjectSample, factors: [f64; 3]) -> Result<ObjectSample> {
    if let Some(f) = factors.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
        return Err(Error::InvalidScaleFactor(*f));
    }
    if factors == [1.0; 3] {
        return Ok(sample.clone());
    }
    let d = sample.bbox.dims();
    rescale(sample, [d[0] * factors[0], d[1] * factors[1], d[2] * factors[2]])
}

/// Shifts each dimension by `target mean - source mean`; points follow
/// multiplicatively.
pub fn sn_normalize(sample: &ObjectSample, source: &SizeStats, target: &SizeStats) -> Result<ObjectSample> {
    source.validate()?;
    target.validate()?;
    if source == target {
        return Ok(sample.clone());
    }
    let d = sample.bbox.dims();
    let new_dims = [
        d[0] + target.mean_l - source.mean_l,
        d[1] + target.mean_w - source.mean_w,
        d[2] + target.mean_h - source.mean_h,
    ];
    if !new_dims.iter().all(|v| *v > 0.0) {
        return Err(Error::NormalizationCollapsesBox);
    }
    rescale(sample, new_dims)
}

/// Three independent uniform draws from `[lo, hi]`.
pub fn rng_factors(lo: f64, hi: f64, rng: &mut impl Rng) -> Result<[f64; 3]> {
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
        return Err(Error::InvalidConfig(format!(
            "scale range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
        )));
    }
    if lo == hi {
        return Ok([lo; 3]);
    }
    Ok([0; 3].map(|_| rng.gen_range(lo..=hi)))
}

/// [`rng_factors`] from a fresh generator seeded with `seed`.
pub fn seeded_factors(lo: f64, hi: f64, seed: u64) -> Result<[f64; 3]> {
    rng_factors(lo, hi, &mut ChaCha8Rng::seed_from_u64(seed))
}
