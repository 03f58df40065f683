//! Second-stage refinement targets.
//!
//! The closest-vertex codec regresses the BEV position of the box corner
//! nearest the sensor instead of the center. Before taking the difference
//! the anchor is re-oriented to the ground-truth heading, so that once the
//! yaw residual is applied the refined box's closest vertex lands exactly on
//! the ground truth's. Skipping that step leaves a vertex gap whenever the
//! yaw changes; [`RotationMode::Disabled`] reproduces it.
//!
//! Height and size are left as the first stage predicted them, so no `z`,
//! `l`, `w` or `h` residual is produced.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{self, wrap_angle, Box7, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EdgeResiduals {
    pub dx_cv: f64,
    pub dy_cv: f64,
    pub dtheta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StandardResiduals {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub dl: f64,
    pub dw: f64,
    pub dh: f64,
    pub dtheta: f64,
}

/// Center-based residuals of the control-group head.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlResiduals {
    pub dx_c: f64,
    pub dy_c: f64,
    pub dtheta: f64,
}

/// How the anchor is re-oriented before taking the vertex difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RotationMode {
    /// Anchor yaw replaced by the target yaw.
    #[default]
    SetToTarget,
    /// Target yaw added on top of the anchor yaw.
    AddTarget,
    /// No re-orientation (the naive variant).
    Disabled,
}

impl RotationMode {
    /// The anchor as seen by the vertex residual, given the target heading.
    fn reoriented(&self, anchor: &Box7, target_theta: f64) -> Box7 {
        match self {
            RotationMode::SetToTarget => anchor.with_theta(target_theta),
            RotationMode::AddTarget => anchor.with_theta(anchor.theta() + target_theta),
            RotationMode::Disabled => *anchor,
        }
    }
}

pub fn closest_vertex(b: &Box7) -> Point2 {
    geometry::bev_corners(b)[geometry::nearest_corner_index(b)]
}

pub fn edgehead_residuals(anchor: &Box7, gt: &Box7) -> EdgeResiduals {
    edgehead_residuals_with(anchor, gt, RotationMode::SetToTarget)
}

pub fn edgehead_residuals_with(anchor: &Box7, gt: &Box7, mode: RotationMode) -> EdgeResiduals {
    let rotated = mode.reoriented(anchor, gt.theta());
    let d = closest_vertex(gt) - closest_vertex(&rotated);
    EdgeResiduals {
        dx_cv: d.x,
        dy_cv: d.y,
        dtheta: wrap_angle(gt.theta() - anchor.theta()),
    }
}

pub fn apply_edgehead_residuals(anchor: &Box7, r: &EdgeResiduals) -> Result<Box7> {
    apply_edgehead_residuals_with(anchor, r, RotationMode::SetToTarget)
}

/// Refines `anchor` with closest-vertex residuals.
///
/// The output keeps the anchor's `z, l, w, h`, takes yaw `θ_anchor + Δθ`,
/// and is placed so that its closest vertex sits at
/// `closest_vertex(reoriented anchor) + (Δx_cv, Δy_cv)`. Among the four
/// placements that put some corner on that point, the one reusing the
/// reoriented anchor's corner is tried first.
///
/// With [`RotationMode::Disabled`] the anchor is translated by the vertex
/// residual and then turned about its center, which is what a head that
/// ignores the yaw coupling effectively learns.
pub fn apply_edgehead_residuals_with(
    anchor: &Box7,
    r: &EdgeResiduals,
    mode: RotationMode,
) -> Result<Box7> {
    let theta = anchor.theta() + r.dtheta;
    let delta = Point2::new(r.dx_cv, r.dy_cv);
    if mode == RotationMode::Disabled {
        let moved = anchor.with_center_bev(anchor.center_bev() + delta)?;
        return Ok(moved.with_theta(theta));
    }

    let rotated = mode.reoriented(anchor, theta);
    let anchor_corner = geometry::nearest_corner_index(&rotated);
    let target = closest_vertex(&rotated) + delta;
    let oriented = anchor.with_theta(theta);

    let mut fallback = None;
    for k in 0..4 {
        let idx = (anchor_corner + k) % 4;
        let center = target - oriented.corner_offset(idx);
        let candidate = oriented.with_center_bev(center)?;
        if fallback.is_none() {
            fallback = Some(candidate);
        }
        if geometry::nearest_corner_index(&candidate) == idx {
            return Ok(candidate);
        }
    }
    // only reachable on exact distance ties
    Ok(fallback.expect("four candidates"))
}

pub fn standard_residuals(anchor: &Box7, gt: &Box7) -> StandardResiduals {
    StandardResiduals {
        dx: gt.x() - anchor.x(),
        dy: gt.y() - anchor.y(),
        dz: gt.z() - anchor.z(),
        dl: gt.l() - anchor.l(),
        dw: gt.w() - anchor.w(),
        dh: gt.h() - anchor.h(),
        dtheta: wrap_angle(gt.theta() - anchor.theta()),
    }
}

pub fn apply_standard_residuals(anchor: &Box7, r: &StandardResiduals) -> Result<Box7> {
    Box7::new(
        anchor.x() + r.dx,
        anchor.y() + r.dy,
        anchor.z() + r.dz,
        anchor.l() + r.dl,
        anchor.w() + r.dw,
        anchor.h() + r.dh,
        anchor.theta() + r.dtheta,
    )
}

pub fn control_group_residuals(anchor: &Box7, gt: &Box7) -> ControlResiduals {
    ControlResiduals {
        dx_c: gt.x() - anchor.x(),
        dy_c: gt.y() - anchor.y(),
        dtheta: wrap_angle(gt.theta() - anchor.theta()),
    }
}

pub fn apply_control_residuals(anchor: &Box7, r: &ControlResiduals) -> Result<Box7> {
    Ok(anchor
        .translated(r.dx_c, r.dy_c, 0.0)?
        .with_theta(anchor.theta() + r.dtheta))
}
