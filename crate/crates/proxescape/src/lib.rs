//! Perturbed proximal algorithms for nonsmooth weakly convex minimization.
//!
//! The library provides three step operators (proximal point, proximal
//! gradient, proximal linear), Moreau-envelope stationarity measurement, the
//! parameter schedules that drive the perturbed loop, and spectral
//! certification of approximate local minima via the step-operator Jacobian.
//!
//! Entry points:
//! - [`oracles::ProblemOracle`] wraps a problem in one of the three classes.
//! - [`steps::StepOperator`] applies one algorithm iteration.
//! - [`driver::run`] executes the perturbed loop under a
//!   [`driver::ScheduleParams`] bundle.
//! - [`certify::certify_point`] decides approximate local minimality.
//! - [`problems`] hosts benchmark landscapes with known critical points.

pub mod certify;
pub mod driver;
pub mod error;
pub mod linalg;
pub mod moreau;
pub mod oracles;
pub mod parallel;
pub mod problems;
pub mod records;
pub mod solvers;
pub mod steps;

pub use certify::{certify_point, estimate_lambda_max, Certificate, CertifyTols, SpectralEstimate};
pub use driver::{
    compute_schedule, run, sample_ball, summarize, RunSummary, ScheduleParams, StationarityMode,
    Trajectory, TrajectoryPoint,
};
pub use error::{ProxError, Result};
pub use moreau::{moreau_grad, moreau_prox, MoreauState};
pub use oracles::{
    CompositeOuterInner, CompositeSmoothPlusProx, NonsmoothObjective, OuterConvex, ProblemOracle,
};
pub use problems::BenchmarkProblem;
pub use steps::{ModelFunction, StepKind, StepOperator};
