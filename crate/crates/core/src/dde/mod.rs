//! The delayed ACTH-cortisol model: parameters, the method-of-steps
//! integrator, the equilibrium and the limit cycle.

mod cycle;
mod fixed;
mod integrate;
mod params;

pub use cycle::{find_limit_cycle, CycleOptions, LimitCycle, DEFAULT_INITIAL_STATE};
pub use fixed::{find_fixed_point, fixed_point_jacobian, fixed_point_residual};
pub use integrate::{integrate, DelaySystem, HermiteSamples, History, Trajectory};
pub use params::{rhs, DimensionalParams, NondimParams, State};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DdeError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("step {step} exceeds the maximum {max} allowed by the delays")]
    StepTooLarge { step: f64, max: f64 },
    #[error("solution became non-finite at tau = {t}")]
    Divergence { t: f64 },
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e}); try another initial guess")]
    NewtonFailed { iterations: usize, residual: f64 },
    #[error("no limit cycle detected (peak amplitude {amplitude:e})")]
    NoLimitCycle { amplitude: f64 },
    #[error("period estimates did not settle (relative spread {spread:e})")]
    PeriodNotConverged { spread: f64 },
    #[error("limit cycle closure defect {defect:e} above tolerance after corrections")]
    ClosureDefect { defect: f64 },
}
