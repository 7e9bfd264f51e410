//! Core algorithms for multi-robot dynamic coverage path planning on gridded
//! worlds: ground-truth target fields and observation models, online Gaussian
//! mixture estimation from sparse cell observations, a range-limited message
//! passing layer, capacity-constrained cell assignment (centralized and
//! distributed), nearest-neighbor coverage path planning, and the
//! discrete-time simulation engine that ties them together.
//!
//! The crate is `no_std`-compatible (with `alloc`); file formats, scenario
//! parsing, and the command-line front end live in the companion `mdcpp-cli`
//! crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod assignment;
pub mod engine;
pub mod estimator;
pub mod geometry;
pub(crate) mod math;
pub mod netsim;
pub mod planner;
pub mod rng;
pub mod world;

pub use geometry::Point2;

/// Robot identifier. Robots are indexed densely from zero; the identifier
/// doubles as the protocol ordering key in the distributed assignment.
pub type RobotId = usize;

/// Index of a grid cell in row-major order.
pub type CellIndex = usize;
