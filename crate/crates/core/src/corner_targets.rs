//! Nearest-corner heatmap targets and corner-based box decoding.
//!
//! Each ground truth is represented by its BEV corner nearest to the sensor.
//! A Gaussian is splatted at that corner on the class heatmap and six
//! regression heads are written at the corner pixel: sub-pixel offset,
//! corner height, size, yaw as `(cos, sin)`, and the corner-to-center vector.
//! The last head picks the right box among the candidates that share a
//! corner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Box7, Point2};
use crate::metrics::{GtObject, PredObject};

/// Gaussian values beyond this many sigmas fall below 1e-6 and are not
/// written.
pub const GAUSSIAN_WINDOW_SIGMAS: f64 = 5.256_521_769_756_932;

/// How the Gaussian standard deviation is derived from the radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaMode {
    /// `σ = max(radius, τ)`.
    #[default]
    Radius,
    /// `σ = (2·max(radius, τ) + 1) / 6`, the diameter/6 rule of common
    /// CenterPoint implementations.
    Diameter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    /// Meters per cell.
    pub cell_size: f64,
    /// Cells per heatmap pixel.
    pub stride: usize,
    /// Minimum Gaussian sigma in pixels.
    pub tau: f64,
    pub min_overlap: f64,
    pub sigma_mode: SigmaMode,
    /// Max distance (meters) between the predicted corner and the decoded
    /// box's nearest corner. Defaults to half a pixel.
    pub corner_tolerance: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            x_range: [-75.2, 75.2],
            y_range: [-75.2, 75.2],
            cell_size: 0.1,
            stride: 1,
            tau: 2.0,
            min_overlap: 0.7,
            sigma_mode: SigmaMode::Radius,
            corner_tolerance: None,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.cell_size.is_finite() && self.cell_size > 0.0) {
            return bad(format!("cell_size must be > 0, got {}", self.cell_size));
        }
        if self.stride == 0 {
            return bad("stride must be >= 1".into());
        }
        for (name, r) in [("x_range", self.x_range), ("y_range", self.y_range)] {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1]) {
                return bad(format!("{name} must satisfy min < max, got {r:?}"));
            }
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return bad(format!("tau must be > 0, got {}", self.tau));
        }
        if !(self.min_overlap > 0.0 && self.min_overlap < 1.0) {
            return bad(format!(
                "min_overlap must be in (0, 1), got {}",
                self.min_overlap
            ));
        }
        if let Some(t) = self.corner_tolerance {
            if !(t.is_finite() && t > 0.0) {
                return bad(format!("corner_tolerance must be > 0, got {t}"));
            }
        }
        if self.width() == 0 || self.height() == 0 {
            return bad("grid has no pixels".into());
        }
        Ok(())
    }

    /// Meters per heatmap pixel.
    pub fn pixel_size(&self) -> f64 {
        self.cell_size * self.stride as f64
    }

    pub fn width(&self) -> usize {
        ((self.x_range[1] - self.x_range[0]) / self.pixel_size()).round() as usize
    }

    pub fn height(&self) -> usize {
        ((self.y_range[1] - self.y_range[0]) / self.pixel_size()).round() as usize
    }

    pub fn corner_tolerance(&self) -> f64 {
        self.corner_tolerance.unwrap_or(self.pixel_size() / 2.0)
    }

    /// Continuous pixel coordinates `(col, row)` of a BEV point.
    pub fn to_pixel(&self, p: Point2) -> (f64, f64) {
        let s = self.pixel_size();
        ((p.x - self.x_range[0]) / s, (p.y - self.y_range[0]) / s)
    }

    pub fn from_pixel(&self, col: f64, row: f64) -> Point2 {
        let s = self.pixel_size();
        Point2::new(col * s + self.x_range[0], row * s + self.y_range[0])
    }
}

/// A single-channel `height × width` raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "plane {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.width + col] = v;
    }

    pub fn same_shape(&self, other: &Plane) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// The six regression heads, one plane per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionMaps {
    /// Sub-pixel corner refinement in pixels.
    pub offset: [Plane; 2],
    pub corner_z: Plane,
    /// `l, w, h` in meters.
    pub size: [Plane; 3],
    /// `cos θ, sin θ`.
    pub yaw: [Plane; 2],
    /// Center minus corner, meters.
    pub c2c: [Plane; 2],
}

impl RegressionMaps {
    pub const CHANNELS: [&'static str; 10] = [
        "offset_x", "offset_y", "corner_z", "size_l", "size_w", "size_h", "yaw_cos", "yaw_sin",
        "c2c_x", "c2c_y",
    ];

    pub fn zeros(width: usize, height: usize) -> Self {
        let p = || Plane::zeros(width, height);
        Self {
            offset: [p(), p()],
            corner_z: p(),
            size: [p(), p(), p()],
            yaw: [p(), p()],
            c2c: [p(), p()],
        }
    }

    /// Channel planes in [`Self::CHANNELS`] order.
    pub fn planes(&self) -> [&Plane; 10] {
        [
            &self.offset[0],
            &self.offset[1],
            &self.corner_z,
            &self.size[0],
            &self.size[1],
            &self.size[2],
            &self.yaw[0],
            &self.yaw[1],
            &self.c2c[0],
            &self.c2c[1],
        ]
    }

    pub fn from_planes(planes: Vec<Plane>) -> Result<Self> {
        if planes.len() != 10 {
            return Err(Error::ShapeMismatch(format!(
                "expected 10 regression planes, got {}",
                planes.len()
            )));
        }
        if planes.iter().any(|p| !p.same_shape(&planes[0])) {
            return Err(Error::ShapeMismatch(
                "regression planes differ in shape".into(),
            ));
        }
        let mut it = planes.into_iter();
        let mut next = || it.next().expect("length checked");
        Ok(Self {
            offset: [next(), next()],
            corner_z: next(),
            size: [next(), next(), next()],
            yaw: [next(), next()],
            c2c: [next(), next()],
        })
    }

    pub fn width(&self) -> usize {
        self.corner_z.width()
    }

    pub fn height(&self) -> usize {
        self.corner_z.height()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetGrid {
    pub classes: Vec<String>,
    /// One heatmap per class.
    pub heatmaps: Vec<Plane>,
    pub regression: RegressionMaps,
    /// 1 where regression targets were written.
    pub mask: Plane,
}

impl TargetGrid {
    pub fn zeros(classes: &[String], width: usize, height: usize) -> Self {
        Self {
            classes: classes.to_vec(),
            heatmaps: classes.iter().map(|_| Plane::zeros(width, height)).collect(),
            regression: RegressionMaps::zeros(width, height),
            mask: Plane::zeros(width, height),
        }
    }

    pub fn width(&self) -> usize {
        self.mask.width()
    }

    pub fn height(&self) -> usize {
        self.mask.height()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BuildReport {
    pub written: usize,
    pub skipped_out_of_range: usize,
    pub skipped_unknown_class: usize,
}

/// The BEV corner nearest the origin, with its index in
/// [`geometry::bev_corners`] order.
pub fn nearest_corner(b: &Box7) -> (Point2, usize) {
    let idx = geometry::nearest_corner_index(b);
    (geometry::bev_corners(b)[idx], idx)
}

/// CornerNet radius: the smallest radius over the three corner-perturbation
/// cases that keeps the IoU with the original box at `min_overlap`.
///
/// Case 1 grows the box by `r` on every side, case 2 shrinks it by `r`, and
/// case 3 shifts both corners by `r`. For each case the smallest positive
/// root of the quadratic in `r` is taken.
pub fn gaussian_radius(h: f64, w: f64, min_overlap: f64) -> Result<f64> {
    if !(h.is_finite() && w.is_finite() && h > 0.0 && w > 0.0) {
        return Err(Error::InvalidBox(format!(
            "radius needs positive dimensions, got h={h} w={w}"
        )));
    }
    if !(min_overlap > 0.0 && min_overlap < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "min_overlap must be in (0, 1), got {min_overlap}"
        )));
    }
    let o = min_overlap;
    let sum = h + w;
    let prod = h * w;

    // o = hw / ((h+2r)(w+2r))  =>  4o r² + 2o(h+w) r + (o-1) hw = 0
    let (a1, b1, c1) = (4.0 * o, 2.0 * o * sum, (o - 1.0) * prod);
    let r1 = 2.0 * -c1 / (b1 + (b1 * b1 - 4.0 * a1 * c1).sqrt());

    // o = (h-2r)(w-2r) / hw  =>  4 r² - 2(h+w) r + (1-o) hw = 0
    let (a2, b2, c2) = (4.0, -2.0 * sum, (1.0 - o) * prod);
    let r2 = 2.0 * c2 / (-b2 + (b2 * b2 - 4.0 * a2 * c2).max(0.0).sqrt());

    // o = (h-r)(w-r) / (2hw - (h-r)(w-r))  =>  (1+o) r² - (1+o)(h+w) r + (1-o) hw = 0
    let (a3, b3, c3) = (1.0 + o, -(1.0 + o) * sum, (1.0 - o) * prod);
    let r3 = 2.0 * c3 / (-b3 + (b3 * b3 - 4.0 * a3 * c3).max(0.0).sqrt());

    Ok(r1.min(r2).min(r3))
}

/// Gaussian sigma in pixels for a box.
pub fn gaussian_sigma(b: &Box7, grid: &GridConfig) -> Result<f64> {
    let px = grid.pixel_size();
    let radius = gaussian_radius(b.l() / px, b.w() / px, grid.min_overlap)?.max(grid.tau);
    Ok(match grid.sigma_mode {
        SigmaMode::Radius => radius,
        SigmaMode::Diameter => (2.0 * radius + 1.0) / 6.0,
    })
}

/// Max-merges `exp(-d² / 2σ²)` centered on pixel `(row, col)` into `plane`.
///
/// Returns `false` (and leaves the plane untouched) when the center is
/// outside the grid.
pub fn splat_gaussian(plane: &mut Plane, row: i64, col: i64, sigma: f64) -> bool {
    if row < 0 || col < 0 || row as usize >= plane.height || col as usize >= plane.width {
        log::warn!("gaussian center ({row}, {col}) outside {}x{} grid", plane.height, plane.width);
        return false;
    }
    let reach = (sigma * GAUSSIAN_WINDOW_SIGMAS).ceil() as i64;
    let denom = 2.0 * sigma * sigma;
    let r0 = (row - reach).max(0);
    let r1 = (row + reach).min(plane.height as i64 - 1);
    let c0 = (col - reach).max(0);
    let c1 = (col + reach).min(plane.width as i64 - 1);
    for r in r0..=r1 {
        let dy = (r - row) as f64;
        for c in c0..=c1 {
            let dx = (c - col) as f64;
            let v = (-(dx * dx + dy * dy) / denom).exp();
            let idx = r as usize * plane.width + c as usize;
            if v > plane.data[idx] {
                plane.data[idx] = v;
            }
        }
    }
    true
}

/// Builds heatmaps and regression targets for one frame.
///
/// Ground truths are processed in slice order; when two share a corner
/// pixel the later one owns the regression channels.
pub fn build_targets(
    gts: &[GtObject],
    classes: &[String],
    grid: &GridConfig,
) -> Result<(TargetGrid, BuildReport)> {
    grid.validate()?;
    let (width, height) = (grid.width(), grid.height());
    let mut out = TargetGrid::zeros(classes, width, height);
    let mut report = BuildReport::default();

    for gt in gts {
        let Some(cls) = classes.iter().position(|c| *c == gt.cls) else {
            report.skipped_unknown_class += 1;
            continue;
        };
        let b = &gt.bbox;
        let (corner, _) = nearest_corner(b);
        let (fx, fy) = grid.to_pixel(corner);
        let (col, row) = (fx.floor(), fy.floor());
        if col < 0.0 || row < 0.0 || col >= width as f64 || row >= height as f64 {
            log::warn!("skipping {} box at ({}, {}): corner outside grid", gt.cls, b.x(), b.y());
            report.skipped_out_of_range += 1;
            continue;
        }
        let sigma = gaussian_sigma(b, grid)?;
        splat_gaussian(&mut out.heatmaps[cls], row as i64, col as i64, sigma);

        let (r, c) = (row as usize, col as usize);
        let reg = &mut out.regression;
        reg.offset[0].set(r, c, fx - col);
        reg.offset[1].set(r, c, fy - row);
        reg.corner_z.set(r, c, b.z());
        reg.size[0].set(r, c, b.l());
        reg.size[1].set(r, c, b.w());
        reg.size[2].set(r, c, b.h());
        reg.yaw[0].set(r, c, b.theta().cos());
        reg.yaw[1].set(r, c, b.theta().sin());
        reg.c2c[0].set(r, c, b.x() - corner.x);
        reg.c2c[1].set(r, c, b.y() - corner.y);
        out.mask.set(r, c, 1.0);
        report.written += 1;
    }
    Ok((out, report))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub class: usize,
    pub row: usize,
    pub col: usize,
    pub score: f64,
}

/// 3×3 local maxima with `score >= score_thresh` (and above zero), best
/// `top_k` first. Equal scores keep row-major order.
pub fn extract_peaks(heatmap: &Plane, class: usize, top_k: usize, score_thresh: f64) -> Vec<Peak> {
    let (w, h) = (heatmap.width, heatmap.height);
    let mut peaks = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let v = heatmap.get(r, c);
            if v <= 0.0 || v < score_thresh {
                continue;
            }
            let is_max = (r.saturating_sub(1)..=(r + 1).min(h - 1)).all(|rr| {
                (c.saturating_sub(1)..=(c + 1).min(w - 1)).all(|cc| heatmap.get(rr, cc) <= v)
            });
            if is_max {
                peaks.push(Peak {
                    class,
                    row: r,
                    col: c,
                    score: v,
                });
            }
        }
    }
    // stable sort keeps row-major order among ties
    peaks.sort_by(|a, b| b.score.total_cmp(&a.score));
    peaks.truncate(top_k);
    peaks
}

/// Peaks of every class heatmap, merged and re-ranked.
pub fn extract_all_peaks(heatmaps: &[Plane], top_k: usize, score_thresh: f64) -> Vec<Peak> {
    let mut all: Vec<Peak> = heatmaps
        .iter()
        .enumerate()
        .flat_map(|(k, p)| extract_peaks(p, k, top_k, score_thresh))
        .collect();
    all.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then((a.row, a.col, a.class).cmp(&(b.row, b.col, b.class)))
    });
    all.truncate(top_k);
    all
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecodeOutput {
    pub preds: Vec<PredObject>,
    /// Corner-to-center vector longer than twice the half diagonal.
    pub rejected_c2c: usize,
    /// Decoded box whose nearest corner is not the predicted corner.
    pub rejected_corner: usize,
    /// Non-positive or non-finite size.
    pub rejected_invalid: usize,
}

/// Turns heatmap peaks plus regression maps back into boxes.
///
/// The corner-to-center vector selects one box among those sharing the
/// corner; candidates whose own nearest corner disagrees with the predicted
/// one are dropped.
pub fn decode_boxes(
    peaks: &[Peak],
    heatmaps: &[Plane],
    reg: &RegressionMaps,
    classes: &[String],
    grid: &GridConfig,
) -> Result<DecodeOutput> {
    for hm in heatmaps {
        if hm.width() != reg.width() || hm.height() != reg.height() {
            return Err(Error::ShapeMismatch(format!(
                "heatmap {}x{} vs regression {}x{}",
                hm.height(),
                hm.width(),
                reg.height(),
                reg.width()
            )));
        }
    }
    let tol = grid.corner_tolerance();
    let mut out = DecodeOutput::default();
    for p in peaks {
        if p.row >= reg.height() || p.col >= reg.width() {
            return Err(Error::ShapeMismatch(format!(
                "peak ({}, {}) outside regression maps",
                p.row, p.col
            )));
        }
        let Some(cls) = classes.get(p.class) else {
            return Err(Error::ShapeMismatch(format!("no class with index {}", p.class)));
        };
        let at = |pl: &Plane| pl.get(p.row, p.col);
        let corner = grid.from_pixel(
            p.col as f64 + at(&reg.offset[0]),
            p.row as f64 + at(&reg.offset[1]),
        );
        let c2c = Point2::new(at(&reg.c2c[0]), at(&reg.c2c[1]));
        let (l, w, h) = (at(&reg.size[0]), at(&reg.size[1]), at(&reg.size[2]));
        let theta = at(&reg.yaw[1]).atan2(at(&reg.yaw[0]));
        let center = corner + c2c;
        let Ok(bbox) = Box7::new(center.x, center.y, at(&reg.corner_z), l, w, h, theta) else {
            out.rejected_invalid += 1;
            continue;
        };
        if c2c.norm() > l.hypot(w) {
            out.rejected_c2c += 1;
            continue;
        }
        let (decoded_corner, _) = nearest_corner(&bbox);
        if decoded_corner.distance(corner) > tol {
            out.rejected_corner += 1;
            continue;
        }
        out.preds.push(PredObject {
            bbox,
            cls: cls.clone(),
            score: p.score,
        });
    }
    Ok(out)
}

/// Peak extraction and decoding over a whole target grid.
pub fn decode_grid(
    targets: &TargetGrid,
    grid: &GridConfig,
    top_k: usize,
    score_thresh: f64,
) -> Result<DecodeOutput> {
    let peaks = extract_all_peaks(&targets.heatmaps, top_k, score_thresh);
    decode_boxes(
        &peaks,
        &targets.heatmaps,
        &targets.regression,
        &targets.classes,
        grid,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Difficulty;

    fn small_grid() -> GridConfig {
        GridConfig {
            x_range: [-20.0, 20.0],
            y_range: [-20.0, 20.0],
            ..GridConfig::default()
        }
    }

    fn car(b: Box7) -> GtObject {
        GtObject {
            bbox: b,
            cls: "Car".into(),
            difficulty: Difficulty::Easy,
        }
    }

    fn classes() -> Vec<String> {
        vec!["Car".to_string()]
    }

    #[test]
    fn nearest_corner_worked_example() {
        let b = Box7::new(10.0, 2.0, 0.0, 4.0, 2.0, 1.5, 0.0).unwrap();
        assert_eq!(nearest_corner(&b).0, Point2::new(8.0, 1.0));
        let sym = Box7::new(0.0, 0.0, 0.0, 4.0, 2.0, 1.5, 0.0).unwrap();
        assert_eq!(nearest_corner(&sym).0, geometry::sort_bev_vertices(&sym).v1);
    }

    #[test]
    fn radius_square_box() {
        let r = gaussian_radius(10.0, 10.0, 0.7).unwrap();
        assert!((r - 0.8167).abs() < 1e-3, "{r}");
        // case 2 closed form for a square: s (1 - sqrt(o)) / 2
        assert!((r - 10.0 * (1.0 - 0.7f64.sqrt()) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn radius_limits_and_errors() {
        let r = gaussian_radius(10.0, 20.0, 1.0 - 1e-12).unwrap();
        assert!(r < 1e-9);
        assert!(gaussian_radius(0.0, 1.0, 0.7).is_err());
        assert!(gaussian_radius(1.0, -1.0, 0.7).is_err());
        assert!(gaussian_radius(1.0, 1.0, 1.0).is_err());
        assert!(gaussian_radius(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn sigma_clamps_to_tau() {
        let grid = small_grid();
        let tiny = Box7::new(5.0, 5.0, 0.0, 0.5, 0.5, 1.0, 0.0).unwrap();
        assert_eq!(gaussian_sigma(&tiny, &grid).unwrap(), 2.0);
        let big = Box7::new(5.0, 5.0, 0.0, 6.5, 6.5, 1.0, 0.0).unwrap();
        let want = gaussian_radius(65.0, 65.0, 0.7).unwrap();
        assert!(want > 5.0);
        assert!((gaussian_sigma(&big, &grid).unwrap() - want).abs() < 1e-9);
        let g = GridConfig {
            sigma_mode: SigmaMode::Diameter,
            ..small_grid()
        };
        assert!((gaussian_sigma(&tiny, &g).unwrap() - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn splat_values() {
        let mut p = Plane::zeros(41, 41);
        assert!(splat_gaussian(&mut p, 20, 20, 3.0));
        assert_eq!(p.get(20, 20), 1.0);
        assert!((p.get(20, 23) - (-0.5f64).exp()).abs() < 1e-15);
        assert!((p.get(17, 20) - 0.606_530_659_712_633_4).abs() < 1e-12);
        assert!(!splat_gaussian(&mut p, -1, 3, 3.0));
        assert!(!splat_gaussian(&mut p, 3, 41, 3.0));
    }

    #[test]
    fn splat_overlap_is_pointwise_max() {
        let mut p = Plane::zeros(30, 20);
        splat_gaussian(&mut p, 8, 10, 2.0);
        splat_gaussian(&mut p, 10, 14, 3.0);
        for r in 0..20 {
            for c in 0..30 {
                let g = |cr: f64, cc: f64, s: f64| {
                    let d2 = (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2);
                    (-d2 / (2.0 * s * s)).exp()
                };
                let want = g(8.0, 10.0, 2.0).max(g(10.0, 14.0, 3.0));
                assert!((p.get(r, c) - want).abs() < 1e-6, "({r},{c})");
            }
        }
    }

    #[test]
    fn targets_single_gt() {
        let grid = small_grid();
        let b = Box7::new(10.03, 2.07, -0.5, 4.0, 2.0, 1.5, 0.0).unwrap();
        let (t, rep) = build_targets(&[car(b)], &classes(), &grid).unwrap();
        assert_eq!(rep.written, 1);
        let (corner, _) = nearest_corner(&b);
        let (fx, fy) = grid.to_pixel(corner);
        let (r, c) = (fy.floor() as usize, fx.floor() as usize);
        assert_eq!(t.heatmaps[0].get(r, c), 1.0);
        assert_eq!(t.mask.get(r, c), 1.0);
        assert!((t.regression.c2c[0].get(r, c) - (b.x() - corner.x)).abs() < 1e-12);
        assert!((t.regression.c2c[1].get(r, c) - (b.y() - corner.y)).abs() < 1e-12);
        assert_eq!(t.regression.corner_z.get(r, c), -0.5);
        let ones = t.heatmaps[0].data().iter().filter(|v| **v == 1.0).count();
        assert_eq!(ones, 1);
    }

    #[test]
    fn targets_empty_and_skips() {
        let grid = small_grid();
        let (t, rep) = build_targets(&[], &classes(), &grid).unwrap();
        assert_eq!(rep, BuildReport::default());
        assert!(t.heatmaps[0].data().iter().all(|v| *v == 0.0));
        assert!(t.mask.data().iter().all(|v| *v == 0.0));

        let far = Box7::new(60.0, 0.0, 0.0, 4.0, 2.0, 1.5, 0.0).unwrap();
        let mut ped = car(Box7::new(5.0, 5.0, 0.0, 1.0, 1.0, 1.8, 0.0).unwrap());
        ped.cls = "Pedestrian".into();
        let (_, rep) = build_targets(&[car(far), ped], &classes(), &grid).unwrap();
        assert_eq!(rep.skipped_out_of_range, 1);
        assert_eq!(rep.skipped_unknown_class, 1);
        assert_eq!(rep.written, 0);
    }

    #[test]
    fn colliding_corners_last_wins() {
        let grid = small_grid();
        // nearest corners (8.05, 1.05) and (8.02, 1.02) share a pixel
        let a = Box7::new(10.05, 2.05, 0.0, 4.0, 2.0, 1.5, 0.0).unwrap();
        let b = Box7::new(10.52, 2.02, 0.2, 5.0, 2.0, 1.6, 0.0).unwrap();
        let (pa, _) = nearest_corner(&a);
        let (pb, _) = nearest_corner(&b);
        let qa = grid.to_pixel(pa);
        let qb = grid.to_pixel(pb);
        assert_eq!(
            (qa.0.floor(), qa.1.floor()),
            (qb.0.floor(), qb.1.floor())
        );
        let (t, rep) = build_targets(&[car(a), car(b)], &classes(), &grid).unwrap();
        assert_eq!(rep.written, 2);
        let (r, c) = (qa.1.floor() as usize, qa.0.floor() as usize);
        assert_eq!(t.heatmaps[0].get(r, c), 1.0);
        assert_eq!(t.regression.size[0].get(r, c), 5.0);
        assert_eq!(t.regression.corner_z.get(r, c), 0.2);
        let (t2, _) = build_targets(&[car(b), car(a)], &classes(), &grid).unwrap();
        assert_eq!(t2.regression.size[0].get(r, c), 4.0);
    }

    #[test]
    fn peaks_cases() {
        let empty = Plane::zeros(10, 10);
        assert!(extract_peaks(&empty, 0, 10, 0.1).is_empty());

        let mut p = Plane::zeros(40, 30);
        splat_gaussian(&mut p, 5, 5, 2.0);
        let single = extract_peaks(&p, 0, 10, 0.1);
        assert_eq!(single.len(), 1);
        assert_eq!((single[0].row, single[0].col), (5, 5));

        // second splat lower: scale it down after drawing
        let mut q = Plane::zeros(40, 30);
        splat_gaussian(&mut q, 20, 30, 2.0);
        for v in q.data.iter_mut() {
            *v *= 0.8;
        }
        splat_gaussian(&mut q, 5, 5, 2.0);
        let two = extract_peaks(&q, 0, 10, 0.1);
        assert_eq!(two.len(), 2);
        assert_eq!((two[0].row, two[0].col), (5, 5));
        assert_eq!((two[1].row, two[1].col), (20, 30));
        assert!((two[1].score - 0.8).abs() < 1e-12);
        assert_eq!(extract_peaks(&q, 0, 1, 0.1).len(), 1);
        assert_eq!(extract_peaks(&q, 0, 10, 0.9).len(), 1);
    }

    #[test]
    fn decode_exact_grid_point() {
        let grid = GridConfig {
            x_range: [-16.0, 16.0],
            y_range: [-16.0, 16.0],
            cell_size: 0.125,
            ..GridConfig::default()
        };
        // nearest corner lands on (8.0, 1.0): an exact grid point
        let b = Box7::new(10.0, 2.0, -0.25, 4.0, 2.0, 1.5, 0.0).unwrap();
        let (t, _) = build_targets(&[car(b)], &classes(), &grid).unwrap();
        let out = decode_grid(&t, &grid, 10, 0.1).unwrap();
        assert_eq!(out.preds.len(), 1);
        let d = out.preds[0].bbox;
        for (got, want) in [
            (d.x(), 10.0),
            (d.y(), 2.0),
            (d.z(), -0.25),
            (d.l(), 4.0),
            (d.w(), 2.0),
            (d.h(), 1.5),
            (d.theta(), 0.0),
        ] {
            assert!((got - want).abs() < 1e-9);
        }
        assert_eq!(out.preds[0].score, 1.0);
    }

    #[test]
    fn decode_rejects_wrong_candidate() {
        let grid = small_grid();
        let b = Box7::new(10.0, 2.0, 0.0, 4.0, 2.0, 1.5, 0.0).unwrap();
        let (mut t, _) = build_targets(&[car(b)], &classes(), &grid).unwrap();
        let peaks = extract_all_peaks(&t.heatmaps, 10, 0.1);
        let (r, c) = (peaks[0].row, peaks[0].col);
        // point the center behind the corner: (6, 0) box, nearest corner (4, -1)
        t.regression.c2c[0].set(r, c, -2.0);
        t.regression.c2c[1].set(r, c, -1.0);
        let out = decode_boxes(&peaks, &t.heatmaps, &t.regression, &t.classes, &grid).unwrap();
        assert!(out.preds.is_empty());
        assert_eq!(out.rejected_corner, 1);

        t.regression.c2c[0].set(r, c, 20.0);
        let out = decode_boxes(&peaks, &t.heatmaps, &t.regression, &t.classes, &grid).unwrap();
        assert_eq!(out.rejected_c2c, 1);

        t.regression.size[0].set(r, c, -1.0);
        let out = decode_boxes(&peaks, &t.heatmaps, &t.regression, &t.classes, &grid).unwrap();
        assert_eq!(out.rejected_invalid, 1);
    }

    #[test]
    fn decode_shape_mismatch() {
        let grid = small_grid();
        let reg = RegressionMaps::zeros(5, 5);
        let hm = vec![Plane::zeros(6, 5)];
        assert!(decode_boxes(&[], &hm, &reg, &classes(), &grid).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(GridConfig::default().validate().is_ok());
        assert_eq!(GridConfig::default().width(), 1504);
        let g = GridConfig {
            cell_size: 0.0,
            ..GridConfig::default()
        };
        assert!(g.validate().is_err());
        let g = GridConfig {
            x_range: [1.0, -1.0],
            ..GridConfig::default()
        };
        assert!(g.validate().is_err());
        let g = GridConfig {
            min_overlap: 1.0,
            ..GridConfig::default()
        };
        assert!(g.validate().is_err());
    }
}
