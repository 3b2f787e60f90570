//! Reconstruction of lattice parameters from scattering magnitudes: the
//! shared forward model, residual assembly, a damped least-squares solver,
//! pairwise initial-guess fits and the two-stage global fit.

mod global;
mod lm;
mod model;
mod params;

pub use global::{
    estimate_scale_factors, fit_global, pairwise_fit, reflection_minima, run_stage, unobserved_scales,
    FitResult, FrozenNames, GlobalFit, PairwiseFit, ParamEstimate,
};
pub use lm::{damped_least_squares, jacobian, null_space_combinations, LmOptions, LmSolution, StopReason};
pub use model::{assemble_residuals, model_magnitude, model_trace_values, FitProblem, TraceTarget};
pub use params::{FitParams, FreezeMask, ParamKind, BETA_FLOOR, ETA_MARGIN};
