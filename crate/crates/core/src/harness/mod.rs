//! Experiment orchestration, the exact oracle, and convergence bounds.

pub mod bounds;
pub mod config;
pub mod experiment;
pub mod oracle;

pub use bounds::{theorem4_bound, wald_lower_bound};
pub use config::ExperimentConfig;
pub use experiment::{run_experiment, ExperimentOutput, ExperimentRow, CSV_HEADER};
pub use oracle::{check_nonmonotonicity, check_superadditivity, oracle_optimal_utility, Direction};
