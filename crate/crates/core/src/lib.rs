//! Closer-surface aware evaluation and coding tools for LiDAR 3D box
//! detection.
//!
//! - [`geometry`]: oriented boxes, vertex ordering, closer-surfaces gap, IoU.
//! - [`metrics`]: greedy matching, R40 average precision, gap histograms.
//! - [`corner_targets`]: nearest-corner heatmap targets and decoding.
//! - [`edgehead`]: closest-vertex refinement residuals.
//! - [`msgm`]: reference multi-scale gated convolution block.
//! - [`augment`]: random object scaling and size normalization.
//! - [`io`] and [`harness`]: file formats and the command-line drivers.

pub mod augment;
pub mod corner_targets;
pub mod edgehead;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod msgm;

pub use error::{Error, Result};
pub use geometry::Box7;
