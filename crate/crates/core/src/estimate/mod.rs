//! Constrained least-squares fits of the estimator class, HC sandwich
//! covariance, the empirical-centring variance correction, and the Poisson
//! log-link fit.

mod glm;
mod ols;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_design, Centering, Coef, CoefConstraint, Dataset, Design, ModelSpec};

pub use glm::{fit_poisson_glm, GLM_MAX_ITER, GLM_TOL};
pub use ols::{estimate_ate_variance_centered, fit_ols, fit_ols_with, fit_weighted, known_pi_variance, sandwich_vcov};

/// Heteroscedasticity-consistent covariance flavour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum HcKind {
    /// Plain plug-in, no small-sample correction.
    #[default]
    HC0,
    /// HC0 scaled by n / (n − q).
    HC1,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FitOptions {
    pub hc: HcKind,
}

/// θ = (α, β, γ, δ) with fixed entries echoed at their constraint values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
}

impl Coefficients {
    fn assemble(spec: &ModelSpec, columns: &[Coef], free: &DVector<f64>) -> Self {
        let fixed_or_zero = |c: &CoefConstraint| c.fixed_value().unwrap_or(0.0);
        let mut out = Coefficients {
            alpha: 0.0,
            beta: 0.0,
            gamma: spec.gamma().iter().map(fixed_or_zero).collect(),
            delta: spec.delta().iter().map(fixed_or_zero).collect(),
        };
        for (col, v) in columns.iter().zip(free.iter()) {
            match *col {
                Coef::Intercept => out.alpha = *v,
                Coef::Treatment => out.beta = *v,
                Coef::Main(j) => out.gamma[j] = *v,
                Coef::Interaction(j) => out.delta[j] = *v,
            }
        }
        out
    }

    /// Free coefficients in design-column order.
    pub fn free_vector(&self, columns: &[Coef]) -> DVector<f64> {
        DVector::from_iterator(
            columns.len(),
            columns.iter().map(|c| match *c {
                Coef::Intercept => self.alpha,
                Coef::Treatment => self.beta,
                Coef::Main(j) => self.gamma[j],
                Coef::Interaction(j) => self.delta[j],
            }),
        )
    }
}

/// Decomposition n·var̂(β̃) = base + correction under empirical centring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenteredVariance {
    /// n·var̂(β̂), the sandwich β-entry scaled by n.
    pub base: f64,
    /// δ̂ₛᵀΣ̂(2δ̂_f − δ̂ₛ)
    pub correction: f64,
    /// max(base + correction, 0)
    pub total: f64,
    pub clamped: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub theta_hat: Coefficients,
    /// β̂ under known-mean centring, β̃ under empirical centring.
    pub ate_hat: f64,
    pub ate_se: f64,
    pub n_used: usize,
    pub converged: bool,
    /// Sandwich covariance of the free coefficients, in `columns` order.
    #[serde(skip)]
    pub vcov: DMatrix<f64>,
    #[serde(skip)]
    pub columns: Vec<Coef>,
    #[serde(skip)]
    pub centered_variance: Option<CenteredVariance>,
    #[serde(skip)]
    pub iterations: usize,
}

impl FitResult {
    /// Index of the treatment column in `vcov`.
    pub fn beta_index(&self) -> usize {
        1
    }

    /// Sandwich β-entry, i.e. var̂(β̂) treating the centring vector as fixed.
    pub fn beta_var(&self) -> f64 {
        self.vcov[(1, 1)]
    }

    pub fn labels(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.label(self.spec.covariates())).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit result serialises")
    }
}

fn check_arms(data: &Dataset) -> Result<()> {
    let (n0, n1) = data.arm_counts();
    if n1 == 0 {
        return Err(Error::EmptyArm(1));
    }
    if n0 == 0 {
        return Err(Error::EmptyArm(0));
    }
    Ok(())
}

/// Free columns and working response y − offset.
fn design_and_response(spec: &ModelSpec, data: &Dataset) -> Result<(Design, DVector<f64>)> {
    check_arms(data)?;
    let design = build_design(spec, data)?;
    let target = data.y() - &design.offset;
    Ok((design, target))
}

/// (ZᵀWZ)⁻¹ M (ZᵀWZ)⁻¹ with M = Σ wᵢ² εᵢ² zᵢzᵢᵀ.
fn hc_sandwich(
    z: &DMatrix<f64>,
    bread: &DMatrix<f64>,
    score_resid: &DVector<f64>,
    hc: HcKind,
) -> DMatrix<f64> {
    let mut scaled = z.clone();
    for (mut row, r) in scaled.row_iter_mut().zip(score_resid.iter()) {
        row *= *r;
    }
    let meat = scaled.tr_mul(&scaled);
    let mut v = bread * meat * bread;
    if hc == HcKind::HC1 {
        let (n, q) = z.shape();
        if n > q {
            v *= n as f64 / (n - q) as f64;
        }
    }
    // symmetrise against rounding
    let vt = v.transpose();
    (v + vt) * 0.5
}

fn is_empirical(spec: &ModelSpec) -> bool {
    matches!(spec.centering(), Centering::Empirical)
}
