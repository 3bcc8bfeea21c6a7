//! Group-Lasso over generalized linear models with an l1,p mixed-norm
//! constraint, for every inner exponent p in [1, inf].
//!
//! The solver keeps a small active set of groups and grows it one violator
//! at a time; the inner subproblems are handled by projected gradient, with
//! the ball projection reduced to per-group proximal operators tied
//! together by an interval bisection on the constraint multiplier. On top
//! of the solver sit completeness/uniqueness diagnostics and a multi-task
//! harness that couples many classification tasks through the group
//! structure.
//!
//! Modules:
//! - [`norms`]: p-norms, dual exponents, mixed norms, group partitions.
//! - [`glm`]: gaussian and bernoulli likelihoods with canonical links.
//! - [`projection`]: per-group prox and the mixed-norm ball projection.
//! - [`solver`]: the active-set algorithm and its diagnostics.
//! - [`multitask`]: task coupling, synthetic generator, baselines.
//! - [`oracle`] (feature `oracle`, on by default): brute-force references.

pub mod error;
pub mod glm;
pub mod multitask;
pub mod norms;
#[cfg(feature = "oracle")]
pub mod oracle;
pub mod projection;
pub mod solver;

pub use error::{Error, Result};
pub use glm::{Coefficients, GlmFamily, GroupedDesign};
pub use norms::{GroupPartition, PNorm};
pub use projection::{project_l1p_ball, prox_group, ProjectionReport, ProxTolerances};
pub use solver::{
    check_completeness, check_kkt, check_uniqueness, fit_active_set, fit_active_set_warm,
    regularization_path, FitConfig, FitResult, KktReport, StepPolicy,
};
