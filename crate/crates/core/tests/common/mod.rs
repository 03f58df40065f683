//! Independent reference implementations shared by the integration tests.
//! None of these call into the library's geometry beyond building boxes.

#![allow(dead_code)]

use cs3d::geometry::Box7;
use rand::Rng;

pub type P = (f64, f64);

pub fn corners(b: &Box7) -> [P; 4] {
    let (c, s) = (b.theta().cos(), b.theta().sin());
    [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)].map(|(u, v)| {
        let (lx, ly) = (u * b.l() / 2.0, v * b.w() / 2.0);
        (b.x() + c * lx - s * ly, b.y() + s * lx + c * ly)
    })
}

fn dist(a: P, b: P) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Full sort by distance to the origin; the middle pair by |x|.
pub fn sorted_vertices(b: &Box7) -> [P; 4] {
    let mut v = corners(b).to_vec();
    v.sort_by(|p, q| dist(*p, (0.0, 0.0)).partial_cmp(&dist(*q, (0.0, 0.0))).unwrap());
    if v[1].0.abs() > v[2].0.abs() {
        v.swap(1, 2);
    }
    [v[0], v[1], v[2], v[3]]
}

/// Distance from `p` to the foot of its perpendicular on line `ab`.
pub fn line_distance(p: P, a: P, b: P) -> f64 {
    let d = (b.0 - a.0, b.1 - a.1);
    let t = ((p.0 - a.0) * d.0 + (p.1 - a.1) * d.1) / (d.0 * d.0 + d.1 * d.1);
    dist(p, (a.0 + t * d.0, a.1 + t * d.1))
}

pub fn gap(pred: &Box7, gt: &Box7) -> f64 {
    let p = sorted_vertices(pred);
    let g = sorted_vertices(gt);
    dist(p[0], g[0]) + line_distance(p[1], g[0], g[1]) + line_distance(p[2], g[0], g[2])
}

fn inside(b: &Box7, p: P) -> bool {
    let (c, s) = (b.theta().cos(), b.theta().sin());
    let (dx, dy) = (p.0 - b.x(), p.1 - b.y());
    let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
    u.abs() <= b.l() / 2.0 && v.abs() <= b.w() / 2.0
}

fn bounds(a: &Box7, b: &Box7) -> (f64, f64, f64, f64) {
    let pts: Vec<P> = corners(a).into_iter().chain(corners(b)).collect();
    let f = |sel: fn(&P) -> f64, max: bool| {
        pts.iter()
            .map(sel)
            .fold(if max { f64::MIN } else { f64::MAX }, |m, v| if max { m.max(v) } else { m.min(v) })
    };
    (f(|p| p.0, false), f(|p| p.0, true), f(|p| p.1, false), f(|p| p.1, true))
}

/// Jittered-grid Monte Carlo BEV IoU with `n × n` samples.
pub fn mc_bev_iou(a: &Box7, b: &Box7, n: usize, rng: &mut impl Rng) -> f64 {
    let (x0, x1, y0, y1) = bounds(a, b);
    let (dx, dy) = ((x1 - x0) / n as f64, (y1 - y0) / n as f64);
    let (mut inter, mut uni) = (0u64, 0u64);
    for i in 0..n {
        for j in 0..n {
            let p = (
                x0 + (i as f64 + rng.gen::<f64>()) * dx,
                y0 + (j as f64 + rng.gen::<f64>()) * dy,
            );
            let (ia, ib) = (inside(a, p), inside(b, p));
            inter += (ia && ib) as u64;
            uni += (ia || ib) as u64;
        }
    }
    if uni == 0 {
        0.0
    } else {
        inter as f64 / uni as f64
    }
}

/// Jittered-grid Monte Carlo 3D IoU with `n³` samples.
pub fn mc_iou_3d(a: &Box7, b: &Box7, n: usize, rng: &mut impl Rng) -> f64 {
    let (x0, x1, y0, y1) = bounds(a, b);
    let z0 = (a.z() - a.h() / 2.0).min(b.z() - b.h() / 2.0);
    let z1 = (a.z() + a.h() / 2.0).max(b.z() + b.h() / 2.0);
    let step = [(x1 - x0) / n as f64, (y1 - y0) / n as f64, (z1 - z0) / n as f64];
    let in_z = |b: &Box7, z: f64| (z - b.z()).abs() <= b.h() / 2.0;
    let (mut inter, mut uni) = (0u64, 0u64);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let p = (
                    x0 + (i as f64 + rng.gen::<f64>()) * step[0],
                    y0 + (j as f64 + rng.gen::<f64>()) * step[1],
                );
                let z = z0 + (k as f64 + rng.gen::<f64>()) * step[2];
                let ia = inside(a, p) && in_z(a, z);
                let ib = inside(b, p) && in_z(b, z);
                inter += (ia && ib) as u64;
                uni += (ia || ib) as u64;
            }
        }
    }
    if uni == 0 {
        0.0
    } else {
        inter as f64 / uni as f64
    }
}

pub fn random_box(rng: &mut impl Rng, extent: f64) -> Box7 {
    Box7::new(
        rng.gen_range(-extent..extent),
        rng.gen_range(-extent..extent),
        rng.gen_range(-2.0..2.0),
        rng.gen_range(0.5..6.0),
        rng.gen_range(0.4..3.0),
        rng.gen_range(0.5..3.0),
        rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
    )
    .unwrap()
}

/// A box near `b`, as a detector would predict it.
pub fn perturbed(b: &Box7, rng: &mut impl Rng, scale: f64) -> Box7 {
    Box7::new(
        b.x() + rng.gen_range(-scale..scale),
        b.y() + rng.gen_range(-scale..scale),
        b.z() + rng.gen_range(-scale..scale) / 2.0,
        b.l() * (1.0 + rng.gen_range(-0.2..0.2) * scale),
        b.w() * (1.0 + rng.gen_range(-0.2..0.2) * scale),
        b.h() * (1.0 + rng.gen_range(-0.2..0.2) * scale),
        b.theta() + rng.gen_range(-0.3..0.3) * scale,
    )
    .unwrap()
}

/// Positive roots of `a r² + b r + c = 0`, by bisection on sign changes.
pub fn quadratic_roots_bisect(a: f64, b: f64, c: f64, hi: f64) -> Vec<f64> {
    let f = |r: f64| (a * r + b) * r + c;
    let n = 20_000;
    let mut roots = Vec::new();
    for i in 0..n {
        let (mut lo, mut up) = (hi * i as f64 / n as f64, hi * (i + 1) as f64 / n as f64);
        if f(lo) == 0.0 && lo > 0.0 {
            roots.push(lo);
            continue;
        }
        if f(lo).signum() == f(up).signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + up);
            if f(lo).signum() == f(mid).signum() {
                lo = mid;
            } else {
                up = mid;
            }
        }
        roots.push(0.5 * (lo + up));
    }
    roots
}

/// Smallest radius over the three overlap cases, each solved by bisection
/// on the overlap equation itself.
pub fn radius_oracle(h: f64, w: f64, o: f64) -> f64 {
    let hi = h + w;
    // case 1: box grown by r on each side; o = hw / ((h+2r)(w+2r))
    let r1 = quadratic_roots_bisect(4.0 * o, 2.0 * o * (h + w), (o - 1.0) * h * w, hi);
    // case 2: box shrunk by r on each side; o = (h-2r)(w-2r) / hw
    let r2 = quadratic_roots_bisect(4.0, -2.0 * (h + w), (1.0 - o) * h * w, hi);
    // case 3: shifted by r in both axes; o = (h-r)(w-r) / (2hw - (h-r)(w-r))
    let r3 = quadratic_roots_bisect(1.0 + o, -(1.0 + o) * (h + w), (1.0 - o) * h * w, hi);
    [r1, r2, r3]
        .iter()
        .map(|rs| rs.iter().cloned().fold(f64::INFINITY, f64::min))
        .fold(f64::INFINITY, f64::min)
}

/// Axis-aligned IoU of `[0,w]×[0,h]` against `[x0,x1]×[y0,y1]`.
pub fn aabb_iou(h: f64, w: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let ix = (w.min(x1) - 0f64.max(x0)).max(0.0);
    let iy = (h.min(y1) - 0f64.max(y0)).max(0.0);
    let inter = ix * iy;
    inter / (h * w + (x1 - x0) * (y1 - y0) - inter)
}
