//! Batch front end: scenario files in, run directories out.

pub mod commands;
pub mod rundir;
pub mod scenario;

pub use commands::{Outcome, RunOptions};
pub use rundir::{Manifest, RunDir};
pub use scenario::{Measure, Scenario, SweepSpec};
