//! JSON run configuration shared by all subcommands.
//!
//! Every section is optional; missing fields take their defaults. Example:
//!
//! ```json
//! {
//!   "eval": {"alpha": 1.0, "difficulty_filter": "moderate", "class_filter": "Car"},
//!   "range": {"point_cloud_range": [-75.2, -75.2, -2.0, 75.2, 75.2, 4.0],
//!             "voxel_size": [0.1, 0.1, 0.15]},
//!   "grid": {"tau": 2.0, "min_overlap": 0.7},
//!   "augment": {"ros_range": [0.85, 1.15]},
//!   "classes": ["Car"]
//! }
//! ```
//!
//! When `grid` is absent its extent and cell size come from `range`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::DEFAULT_ROS_RANGE;
use crate::corner_targets::GridConfig;
use crate::error::{Error, Result};
use crate::metrics::EvalConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RangeConfig {
    /// `[x_min, y_min, z_min, x_max, y_max, z_max]`.
    pub point_cloud_range: [f64; 6],
    pub voxel_size: [f64; 3],
}

impl Default for RangeConfig {
    fn default() -> Self {
        Self {
            point_cloud_range: [-75.2, -75.2, -2.0, 75.2, 75.2, 4.0],
            voxel_size: [0.1, 0.1, 0.15],
        }
    }
}

impl RangeConfig {
    pub fn validate(&self) -> Result<()> {
        let r = &self.point_cloud_range;
        for axis in 0..3 {
            if !(r[axis].is_finite() && r[axis + 3].is_finite() && r[axis] < r[axis + 3]) {
                return Err(Error::InvalidConfig(format!(
                    "point_cloud_range axis {axis}: need min < max, got [{}, {}]",
                    r[axis],
                    r[axis + 3]
                )));
            }
        }
        if let Some(v) = self.voxel_size.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidConfig(format!("voxel size must be > 0, got {v}")));
        }
        Ok(())
    }
}

impl GridConfig {
    /// Grid spanning the XY range with one cell per voxel column.
    pub fn from_range(range: &RangeConfig) -> Result<Self> {
        range.validate()?;
        let r = &range.point_cloud_range;
        if range.voxel_size[0] != range.voxel_size[1] {
            return Err(Error::InvalidConfig(format!(
                "heatmap cells must be square, voxel size is {} x {}",
                range.voxel_size[0], range.voxel_size[1]
            )));
        }
        let grid = GridConfig {
            x_range: [r[0], r[3]],
            y_range: [r[1], r[4]],
            cell_size: range.voxel_size[0],
            ..GridConfig::default()
        };
        grid.validate()?;
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub ros_range: [f64; 2],
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            ros_range: [DEFAULT_ROS_RANGE.0, DEFAULT_ROS_RANGE.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub eval: EvalConfig,
    pub range: RangeConfig,
    pub grid: Option<GridConfig>,
    pub augment: AugmentConfig,
    pub classes: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            eval: EvalConfig::default(),
            range: RangeConfig::default(),
            grid: None,
            augment: AugmentConfig::default(),
            classes: vec!["Car".to_string()],
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.eval.validate()?;
        self.range.validate()?;
        self.grid_config()?;
        if self.classes.is_empty() {
            return Err(Error::InvalidConfig("classes must not be empty".into()));
        }
        Ok(())
    }

    /// The explicit grid section, or one derived from the range.
    pub fn grid_config(&self) -> Result<GridConfig> {
        match &self.grid {
            Some(g) => {
                g.validate()?;
                Ok(g.clone())
            }
            None => GridConfig::from_range(&self.range),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_grid_defaults() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.grid_config().unwrap(), GridConfig::default());
    }

    #[test]
    fn partial_json() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"eval": {"alpha": 0.5}, "classes": ["Car", "Pedestrian"]}"#)
                .unwrap();
        assert_eq!(cfg.eval.alpha, 0.5);
        assert_eq!(cfg.eval.thresholds, crate::metrics::Thresholds::default());
        assert_eq!(cfg.classes.len(), 2);
        assert!(serde_json::from_str::<RunConfig>(r#"{"evl": {}}"#).is_err());
    }

    #[test]
    fn range_validation() {
        let mut r = RangeConfig::default();
        r.point_cloud_range[2] = 5.0;
        assert!(r.validate().is_err());
        let mut r = RangeConfig::default();
        r.voxel_size[2] = 0.0;
        assert!(r.validate().is_err());
    }
}
