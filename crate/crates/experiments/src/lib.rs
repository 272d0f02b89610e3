//! Configuration-driven experiments on top of `mhlj`: strategy comparisons
//! and parameter sweeps that write CSV traces and summary tables.

pub mod error;
pub mod presets;
pub mod run;
pub mod spec;

pub use error::{ExpError, Result};
pub use presets::{preset, Preset, PRESETS};
pub use run::{execute, run_experiment, run_sweep, ExperimentSummary, StrategySummary, SweepSummary};
pub use spec::{Axis, ExperimentSpec, GraphSpec, StepSize, StrategySpec, SweepSpec};
