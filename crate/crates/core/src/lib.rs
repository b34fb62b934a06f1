//! Fast samplers for mean-reverting diffusion.
//!
//! The forward process is the mean-reverting SDE
//! `dx = theta(t) (mu - x) dt + g(t) dw` with `g^2 = 2 sigma_inf^2 theta`,
//! whose marginals interpolate between the data and `N(mu, sigma_inf^2 I)`.
//! This crate provides the noise schedule in closed form, exact analytic
//! predictor oracles standing in for trained networks, eight
//! exponential-integrator reverse solvers plus two baselines, and the
//! diagnostics used to study their convergence behavior.

pub mod diagnostics;
pub mod error;
pub mod predictor;
pub mod process;
pub mod sampler;
pub mod schedule;

pub use diagnostics::{
    convergence_ratio, empirical_order, pca_project, rmse, rmse_trajectories, ConvergenceReport,
    PcaBasis, TrajectoryProjection,
};
pub use error::{DiagnosticsError, PredictorError, SamplerError, ScheduleError};
pub use predictor::{make_oracle, OracleSpec, Parameterization, Predictor};
pub use process::{forward_sample, transition_moments, ChainRng, StateVec};
pub use sampler::{run, run_with_inputs, SamplerSpec, SolverFamily, Trajectory};
pub use schedule::{Schedule, ScheduleFamily, SpacingMode, TimeGrid};
