//! Nested frame subsets and the multilevel drivers built on them.

mod driver;
mod predict;
mod schedule;
mod stopping;
mod tridiag;

pub use driver::{
    default_lambda, full_dissimilarity, frame_weights, spml_run, stml_run, DriverConfig, GirProblem, LevelRun,
};
pub use predict::{interpolate_to, linear_predict, ls_predict};
pub use schedule::{build_temporal_levels, TemporalSchedule};
pub use stopping::{check_stop, StopMode, StoppingPolicy};
pub use tridiag::{thomas_solve, TridiagSystem};
