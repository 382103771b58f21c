use thiserror::Error;

use crate::model::FormulaError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Formula(#[from] FormulaError),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("treatment arm {0} is empty")]
    EmptyArm(u8),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("weight at row {index} is not strictly positive and finite")]
    NonPositiveWeight { index: usize },

    #[error("singular design: columns {columns:?} are (nearly) collinear")]
    Singular { columns: Vec<String> },

    #[error("IRLS did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("coefficients diverge (separation in the Poisson fit)")]
    Separation,

    #[error("unknown estimator name `{0}`")]
    UnknownName(String),

    #[error("assignment probability {0} is outside (0, 1)")]
    InvalidPi(f64),

    #[error("population has no exact moments")]
    MissingMoments,

    #[error("population has no sampler")]
    MissingSampler,

    #[error("invalid population: {0}")]
    InvalidPopulation(String),

    #[error("covariate-dependent assignment is not covered by the population calculus")]
    CovariateDependentAssignment,

    #[error("model pair does not satisfy the nesting condition: {0}")]
    ConditionViolated(String),

    #[error("the two model specifications are identical")]
    IdenticalSpecs,

    #[error("counterexample unavailable: {0}")]
    CounterexampleUnavailable(String),

    #[error("invalid simulation setup: {0}")]
    InvalidSimulation(String),
}
