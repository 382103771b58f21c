//! Linear regression-adjusted estimators of the average treatment effect in
//! two-arm randomized experiments.
//!
//! A model restricts the main-effect (`Γ`) and interaction (`Δ`) coefficients
//! of `Y ~ 1 + A + X + A:X`. This crate fits such models by constrained OLS
//! or a Poisson log-link GLM, computes their asymptotic variances from
//! population moments, decides which of two models is guaranteed to be more
//! efficient, and runs seeded Monte Carlo experiments.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dominance;
pub mod error;
pub mod estimate;
pub mod linalg;
pub mod model;
pub mod population;
pub mod seed;
pub mod sim;

pub use dominance::{check, check_centered, check_known_mean, CenteringMode, DominanceVerdict, Verdict};
pub use error::{Error, Result};
pub use estimate::{fit_ols, fit_poisson_glm, fit_weighted, FitResult, HcKind};
pub use model::{named_spec, parse_formula, Centering, CoefConstraint, Dataset, Estimator, ModelSpec};
pub use population::{Law, PopulationMoments, PopulationSpec};
pub use sim::{MonteCarloCell, MonteCarloReport, Scenario};
pub use nalgebra;
