//! Monte Carlo orchestration, appendix checks and report emission.

mod config;
mod exact;
mod experiments;
mod report;

pub use config::{ExperimentConfig, GateSettings, InitialCondition, ItoRule, RunMode};
pub use exact::ExactSampler;
pub use experiments::{
    ball_power_integral, initial_field, is_three_square_excluded, lattice_power_sum, lattice_sum_asymptotic,
    number_theory_checks, r3_table, required_modes, run_consistency, run_linear_validation, run_normality,
    unit_ball_volume, LATTICE_ALPHAS, LATTICE_DIMENSIONS, LATTICE_TOLERANCE,
};
pub use report::{Gate, Report};
