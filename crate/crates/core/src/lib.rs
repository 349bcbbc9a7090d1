//! Shannon mutual information between a range-sensor beam and an occupancy grid.
//!
//! The crate provides the FSMI family of per-beam mutual information kernels
//! (exact, Gaussian-truncated, uniform-noise), their counterparts operating
//! directly on run-length-encoded occupancy sequences, numerical-integration
//! and CSQMI baselines, plus a small 2D exploration simulator used to compare
//! information-driven and frontier-driven planners.
//!
//! Modules:
//! - [`grid`]: occupancy grid storage, DDA ray tracing, Bayesian updates, map entropy
//! - [`sensor`]: noise models, the per-cell information kernel `f(delta, r)`, lookup tables
//! - [`mi`]: per-beam MI on uncompressed occupancy sequences
//! - [`rle`]: run-length-encoded sequences and the compressed-domain MI family
//! - [`explore`]: synthetic worlds, noisy scans, MI surfaces, planners, exploration loop

pub mod explore;
pub mod grid;
pub mod mi;
pub mod rle;
pub mod sensor;

pub use grid::{OccupancyGrid2D, Pose, RayTrace};
pub use mi::{BeamView, HitDistribution, MiBreakdown};
pub use rle::RleSequence;
pub use sensor::{FTable, NoiseKind, PhiTable, SensorModel};
