//! Real-time spatial mapping from streaming LiDAR frames.
//!
//! `losmap` turns a sequence of posed LiDAR sweeps into:
//!
//! - a watertight per-frame boundary mesh with confidence-weighted point
//!   normals, built from a radial inversion of the sweep and the convex hull
//!   of the inverted points ([`mesh`]),
//! - an incrementally fused voxel field of line-of-sight distances that
//!   separates free, occupied and unknown space ([`field`]),
//! - per-point moving-object labels derived from the field ([`field::detect_dynamic`]),
//! - a fused static-scene surface mesh via TSDF integration and marching
//!   cubes ([`recon`]),
//! - a synthetic ring-pattern scanner with exact ground truth for testing
//!   all of the above ([`sim`]), and metric evaluation ([`metrics`]).
//!
//! The `losmap` binary exposes the full pipeline (`simulate`, `run`, `eval`).

pub mod config;
pub mod error;
pub mod field;
pub mod geom;
pub mod hull;
pub mod mesh;
pub mod metrics;
pub mod pipeline;
pub mod recon;
pub mod scan;
pub mod sim;

pub use config::PipelineConfig;
pub use error::Error;
pub use geom::{Pose, Vec3};
pub use scan::{ScanFrame, Trajectory};

pub type Result<T> = std::result::Result<T, Error>;
