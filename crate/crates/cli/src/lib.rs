//! Scenario files, run orchestration, and plot-data emission for the
//! coverage simulator. The binary in `main.rs` is a thin wrapper over this
//! library so the same entry points can be driven from tests.

pub mod batch;
pub mod config;
pub mod output;
pub mod plotdata;
