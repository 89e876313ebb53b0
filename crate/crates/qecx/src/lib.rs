//! Experiment harness: configured Monte Carlo sweeps, Wilson intervals,
//! slope fits, footprint estimates and result files.

pub mod config;
pub mod emit;
pub mod footprint;
pub mod run;
pub mod stats;

pub use config::{ConfigError, ExperimentConfig, GadgetSpec, NoiseSpec};
pub use emit::{emit_results, parse_results, EmitError, Format};
pub use footprint::{block_qubits, footprint, Footprint, FootprintError};
pub use run::{run_experiment, PointResult, RunError, RunResult};
pub use stats::{fit_slope, wilson, FitError, SlopeFit};
