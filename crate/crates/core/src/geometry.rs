//! Oriented-box primitives on the bird's-eye-view (BEV) plane.
//!
//! The sensor sits at the origin with `z` pointing up. All boxes are upright:
//! yaw rotates about `z` and is measured from the `+x` axis.
//!
//! The closer-surfaces gap compares the two faces of a prediction adjacent to
//! its nearest corner with the same faces of the ground truth. Those faces are
//! what a LiDAR actually sees, so unlike IoU the gap depends on where the
//! boxes sit relative to the origin.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Tolerance below which an edge is treated as a single point.
pub const DEGENERATE_EDGE_EPS: f64 = 1e-12;

/// Collinearity epsilon used by the polygon clipper.
pub const CLIP_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    /// Rotates counter-clockwise by `angle` radians about the origin.
    pub fn rotated(self, angle: f64) -> Point2 {
        let (s, c) = angle.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(angle: f64) -> f64 {
    if (-PI..PI).contains(&angle) {
        return angle;
    }
    let two_pi = 2.0 * PI;
    let wrapped = angle - two_pi * ((angle + PI) / two_pi).floor();
    // floor() can leave the value a rounding step outside the interval
    if wrapped >= PI {
        wrapped - two_pi
    } else if wrapped < -PI {
        wrapped + two_pi
    } else {
        wrapped
    }
}

/// A 7-DoF upright box: geometric center, dimensions and yaw.
///
/// `l` is measured along the heading, `w` across it. Construction validates
/// positivity and finiteness and wraps the yaw into `[-π, π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box7 {
    x: f64,
    y: f64,
    z: f64,
    l: f64,
    w: f64,
    h: f64,
    theta: f64,
}

impl Box7 {
    pub fn new(x: f64, y: f64, z: f64, l: f64, w: f64, h: f64, theta: f64) -> Result<Self> {
        let fields = [x, y, z, l, w, h, theta];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBox(format!("non-finite field in {fields:?}")));
        }
        if l <= 0.0 || w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidBox(format!(
                "dimensions must be positive, got l={l} w={w} h={h}"
            )));
        }
        Ok(Self {
            x,
            y,
            z,
            l,
            w,
            h,
            theta: wrap_angle(theta),
        })
    }

    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }
    pub fn l(&self) -> f64 {
        self.l
    }
    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn center_bev(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn dims(&self) -> [f64; 3] {
        [self.l, self.w, self.h]
    }

    /// Same box with a new yaw (wrapped).
    pub fn with_theta(&self, theta: f64) -> Self {
        Self {
            theta: wrap_angle(theta),
            ..*self
        }
    }

    /// Same box with its BEV center moved.
    pub fn with_center_bev(&self, center: Point2) -> Result<Self> {
        Self::new(
            center.x, center.y, self.z, self.l, self.w, self.h, self.theta,
        )
    }

    pub fn translated(&self, dx: f64, dy: f64, dz: f64) -> Result<Self> {
        Self::new(
            self.x + dx,
            self.y + dy,
            self.z + dz,
            self.l,
            self.w,
            self.h,
            self.theta,
        )
    }

    pub fn bev_area(&self) -> f64 {
        self.l * self.w
    }

    pub fn volume(&self) -> f64 {
        self.l * self.w * self.h
    }

    pub fn z_min(&self) -> f64 {
        self.z - self.h / 2.0
    }

    pub fn z_max(&self) -> f64 {
        self.z + self.h / 2.0
    }

    /// Offset from the center to corner `index` in the world frame.
    ///
    /// Corners are indexed counter-clockwise in the box frame starting at
    /// `(+l/2, +w/2)`, so corner `i` and `(i + 2) % 4` are diagonal.
    pub fn corner_offset(&self, index: usize) -> Point2 {
        let (su, sv) = CORNER_SIGNS[index % 4];
        Point2::new(su * self.l / 2.0, sv * self.w / 2.0).rotated(self.theta)
    }

    /// Converts a world BEV point into the box frame (heading along `+u`).
    pub fn to_local(&self, p: Point2) -> Point2 {
        (p - self.center_bev()).rotated(-self.theta)
    }

    pub fn from_local(&self, p: Point2) -> Point2 {
        p.rotated(self.theta) + self.center_bev()
    }
}

const CORNER_SIGNS: [(f64, f64); 4] = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];

/// The four BEV corners, counter-clockwise.
pub fn bev_corners(b: &Box7) -> [Point2; 4] {
    let c = b.center_bev();
    [0, 1, 2, 3].map(|i| c + b.corner_offset(i))
}

/// BEV corners ordered for the closer-surfaces gap.
///
/// `v1` is the corner nearest the origin and `v4` the diagonal opposite,
/// which is always the farthest. `v2` and `v3` are the two corners adjacent
/// to `v1`, with `|v2.x| <= |v3.x|`. Both `v1v2` and `v1v3` are therefore
/// edges of the rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderedBevVertices {
    pub v1: Point2,
    pub v2: Point2,
    pub v3: Point2,
    pub v4: Point2,
}

impl OrderedBevVertices {
    pub fn as_array(&self) -> [Point2; 4] {
        [self.v1, self.v2, self.v3, self.v4]
    }
}

/// Distance ordering with the deterministic tie-break: smaller distance,
/// then smaller `|x|`, then smaller `y`, then smaller `x`.
fn nearness_cmp(a: &Point2, b: &Point2) -> Ordering {
    a.norm_sq()
        .total_cmp(&b.norm_sq())
        .then(a.x.abs().total_cmp(&b.x.abs()))
        .then(a.y.total_cmp(&b.y))
        .then(a.x.total_cmp(&b.x))
}

/// Index (in [`bev_corners`] order) of the corner nearest the origin.
pub fn nearest_corner_index(b: &Box7) -> usize {
    let corners = bev_corners(b);
    (0..4)
        .min_by(|&i, &j| nearness_cmp(&corners[i], &corners[j]))
        .expect("four corners")
}

pub fn sort_bev_vertices(b: &Box7) -> OrderedBevVertices {
    let corners = bev_corners(b);
    let near = nearest_corner_index(b);
    let mut adjacent = [corners[(near + 1) % 4], corners[(near + 3) % 4]];
    adjacent.sort_by(|a, b| {
        a.x.abs()
            .total_cmp(&b.x.abs())
            .then_with(|| nearness_cmp(a, b))
    });
    OrderedBevVertices {
        v1: corners[near],
        v2: adjacent[0],
        v3: adjacent[1],
        v4: corners[(near + 2) % 4],
    }
}

/// Perpendicular distance from `p` to the infinite line through `a` and `b`.
pub fn point_to_line_distance(p: Point2, a: Point2, b: Point2) -> Result<f64> {
    let edge = b - a;
    let len = edge.norm();
    if len < DEGENERATE_EDGE_EPS {
        return Err(Error::DegenerateEdge);
    }
    Ok(edge.cross(p - a).abs() / len)
}

/// The closer-surfaces gap `G_cs` between a prediction and its ground truth.
///
/// `|V1_pred - V1_gt| + Dist(V2_pred, E_gt(1,2)) + Dist(V3_pred, E_gt(1,3))`,
/// all on the BEV plane.
pub fn closer_surfaces_gap(pred: &Box7, gt: &Box7) -> f64 {
    let p = sort_bev_vertices(pred);
    let g = sort_bev_vertices(gt);
    // edges of a valid box are never degenerate
    let d2 = point_to_line_distance(p.v2, g.v1, g.v2).unwrap_or(0.0);
    let d3 = point_to_line_distance(p.v3, g.v1, g.v3).unwrap_or(0.0);
    p.v1.distance(g.v1) + d2 + d3
}

/// Signed shoelace area (positive for counter-clockwise polygons).
pub fn polygon_area(poly: &[Point2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let n = poly.len();
    let twice: f64 = (0..n).map(|i| poly[i].cross(poly[(i + 1) % n])).sum();
    twice / 2.0
}

/// Sutherland–Hodgman clipping of `subject` by a convex counter-clockwise
/// `clip` polygon.
pub fn clip_convex(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let mut output = subject.to_vec();
    let m = clip.len();
    for i in 0..m {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % m];
        let edge = b - a;
        let side = |p: Point2| edge.cross(p - a);

        let input = std::mem::take(&mut output);
        let n = input.len();
        for j in 0..n {
            let cur = input[j];
            let prev = input[(j + n - 1) % n];
            let s_cur = side(cur);
            let s_prev = side(prev);
            let cur_in = s_cur >= -CLIP_EPS;
            let prev_in = s_prev >= -CLIP_EPS;
            if cur_in {
                if !prev_in {
                    output.push(intersect(prev, cur, s_prev, s_cur));
                }
                output.push(cur);
            } else if prev_in {
                output.push(intersect(prev, cur, s_prev, s_cur));
            }
        }
    }
    output
}

fn intersect(p: Point2, q: Point2, sp: f64, sq: f64) -> Point2 {
    let denom = sp - sq;
    if denom.abs() < CLIP_EPS {
        return q;
    }
    let t = sp / denom;
    p + (q - p) * t
}

/// Area of the BEV intersection of two boxes.
pub fn bev_intersection_area(a: &Box7, b: &Box7) -> f64 {
    let pa = bev_corners(a);
    let pb = bev_corners(b);
    // cheap reject on circumscribed circles
    let ra = a.l.hypot(a.w) / 2.0;
    let rb = b.l.hypot(b.w) / 2.0;
    if a.center_bev().distance(b.center_bev()) > ra + rb {
        return 0.0;
    }
    polygon_area(&clip_convex(&pa, &pb)).max(0.0)
}

/// BEV intersection-over-union in `[0, 1]`.
pub fn bev_iou(a: &Box7, b: &Box7) -> f64 {
    let inter = bev_intersection_area(a, b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.bev_area() + b.bev_area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// 3D intersection-over-union of two upright boxes in `[0, 1]`.
pub fn iou_3d(a: &Box7, b: &Box7) -> f64 {
    let dz = a.z_max().min(b.z_max()) - a.z_min().max(b.z_min());
    if dz <= 0.0 {
        return 0.0;
    }
    let inter = bev_intersection_area(a, b) * dz;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.volume() + b.volume() - inter;
    (inter / union).clamp(0.0, 1.0)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidPenaltyRatio(alpha))
    }
}

/// Closer-surfaces penalty factor `1 / (1 + alpha * gap)`.
pub fn penalty_from_gap(gap: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(1.0 / (1.0 + alpha * gap))
}

/// `Γ_ABS^CS = 1 / (1 + α·G_cs)`.
pub fn cs_abs_score(pred: &Box7, gt: &Box7, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    penalty_from_gap(closer_surfaces_gap(pred, gt), alpha)
}

/// `Γ_BEV^CS = IoU_BEV / (1 + α·G_cs)`.
pub fn cs_bev_score(pred: &Box7, gt: &Box7, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let iou = bev_iou(pred, gt);
    if iou == 0.0 {
        return Ok(0.0);
    }
    Ok(iou / (1.0 + alpha * closer_surfaces_gap(pred, gt)))
}
