//! Model specifications for the class of constrained regression-adjusted
//! estimators, the datasets they are fitted on, and design construction.
//!
//! A [`ModelSpec`] fixes, per covariate, whether the main-effect coefficient
//! (γⱼ) and the treatment-interaction coefficient (δⱼ) are free or pinned to
//! a constant. The intercept and the treatment coefficient are always free.

mod design;
mod formula;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use design::{build_design, Coef, Design};
pub use formula::{parse_formula, FormulaError, FormulaErrorKind};

/// Constraint set for one coefficient: the real line or a singleton.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefConstraint {
    Free,
    Fixed(f64),
}

impl CoefConstraint {
    pub fn is_free(&self) -> bool {
        matches!(self, CoefConstraint::Free)
    }

    pub fn fixed_value(&self) -> Option<f64> {
        match *self {
            CoefConstraint::Fixed(v) => Some(v),
            CoefConstraint::Free => None,
        }
    }

    /// Set containment: ℝ ⊇ anything, {c} ⊇ {c} only.
    pub fn contains(&self, other: &CoefConstraint) -> bool {
        match (self, other) {
            (CoefConstraint::Free, _) => true,
            (CoefConstraint::Fixed(_), CoefConstraint::Free) => false,
            (CoefConstraint::Fixed(a), CoefConstraint::Fixed(b)) => a == b,
        }
    }
}

/// How covariates are centred before the regression is assembled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Subtract a known population mean; the treatment coefficient is β̂.
    KnownMean(Vec<f64>),
    /// Subtract the sample mean; the treatment coefficient is β̃ = β̂ + δ̂ᵀX̄.
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    covariates: Vec<String>,
    gamma: Vec<CoefConstraint>,
    delta: Vec<CoefConstraint>,
    centering: Centering,
}

impl ModelSpec {
    pub fn new(
        covariates: Vec<String>,
        gamma: Vec<CoefConstraint>,
        delta: Vec<CoefConstraint>,
    ) -> Result<Self> {
        let p = covariates.len();
        if p == 0 {
            return Err(Error::DimensionMismatch("a model needs at least one covariate".into()));
        }
        if gamma.len() != p || delta.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "{} covariates but {} main-effect and {} interaction constraints",
                p,
                gamma.len(),
                delta.len()
            )));
        }
        if gamma.iter().chain(&delta).any(|c| matches!(c, CoefConstraint::Fixed(v) if !v.is_finite())) {
            return Err(Error::NonFinite("fixed coefficient"));
        }
        Ok(Self { covariates, gamma, delta, centering: Centering::Empirical })
    }

    /// Spec with default covariate names `X1..Xp`.
    pub fn with_default_names(gamma: Vec<CoefConstraint>, delta: Vec<CoefConstraint>) -> Result<Self> {
        Self::new(default_names(gamma.len()), gamma, delta)
    }

    pub fn with_centering(mut self, centering: Centering) -> Result<Self> {
        if let Centering::KnownMean(mu) = &centering {
            if mu.len() != self.p() {
                return Err(Error::DimensionMismatch(format!(
                    "known mean has length {} but p = {}",
                    mu.len(),
                    self.p()
                )));
            }
            if mu.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("known mean"));
            }
        }
        self.centering = centering;
        Ok(self)
    }

    pub fn renamed(mut self, covariates: Vec<String>) -> Result<Self> {
        if covariates.len() != self.p() {
            return Err(Error::DimensionMismatch("covariate name count differs from p".into()));
        }
        self.covariates = covariates;
        Ok(self)
    }

    pub fn p(&self) -> usize {
        self.covariates.len()
    }

    pub fn covariates(&self) -> &[String] {
        &self.covariates
    }

    pub fn gamma(&self) -> &[CoefConstraint] {
        &self.gamma
    }

    pub fn delta(&self) -> &[CoefConstraint] {
        &self.delta
    }

    pub fn centering(&self) -> &Centering {
        &self.centering
    }

    /// 𝒰(Γ), zero-based.
    pub fn unrestricted_gamma(&self) -> Vec<usize> {
        free_indices(&self.gamma)
    }

    /// 𝒰(Δ), zero-based.
    pub fn unrestricted_delta(&self) -> Vec<usize> {
        free_indices(&self.delta)
    }

    /// True when every δⱼ is fixed at zero.
    pub fn has_no_interactions(&self) -> bool {
        self.delta.iter().all(|c| *c == CoefConstraint::Fixed(0.0))
    }

    /// True for Γ = Δ = ℝᵖ.
    pub fn is_full(&self) -> bool {
        self.gamma.iter().chain(&self.delta).all(CoefConstraint::is_free)
    }

    /// Same constraint sets, ignoring names and centering.
    pub fn same_constraints(&self, other: &ModelSpec) -> bool {
        self.gamma == other.gamma && self.delta == other.delta
    }

    /// Number of free regression columns, 2 + |𝒰(Γ)| + |𝒰(Δ)|.
    pub fn n_free(&self) -> usize {
        2 + self.unrestricted_gamma().len() + self.unrestricted_delta().len()
    }

    /// The full (ANHECOVA) model over the same covariates and centering.
    pub fn full_model(&self) -> ModelSpec {
        ModelSpec {
            covariates: self.covariates.clone(),
            gamma: vec![CoefConstraint::Free; self.p()],
            delta: vec![CoefConstraint::Free; self.p()],
            centering: self.centering.clone(),
        }
    }

    /// Formula text that parses back to this spec (centering aside).
    pub fn formula(&self) -> String {
        formula::format_spec(self)
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.formula())
    }
}

fn free_indices(cs: &[CoefConstraint]) -> Vec<usize> {
    cs.iter().enumerate().filter(|(_, c)| c.is_free()).map(|(j, _)| j).collect()
}

pub fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("X{j}")).collect()
}

/// The named estimators of the class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Estimator {
    Anova,
    Ancova,
    Anhecova,
    /// Difference-in-differences: first covariate is the baseline outcome with γ₁ = 1.
    Did,
    /// Lagged-dependent-variable regression: baseline outcome coefficient free.
    Ldv,
    /// Γ = {0}ᵖ, Δ = ℝᵖ.
    InteractionsOnly,
}

impl Estimator {
    pub const ALL: [Estimator; 6] = [
        Estimator::Anova,
        Estimator::Ancova,
        Estimator::Anhecova,
        Estimator::Did,
        Estimator::Ldv,
        Estimator::InteractionsOnly,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Anova => "ANOVA",
            Estimator::Ancova => "ANCOVA",
            Estimator::Anhecova => "ANHECOVA",
            Estimator::Did => "DiD",
            Estimator::Ldv => "LDV",
            Estimator::InteractionsOnly => "INTERACTIONS",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownName(s.to_string()))
    }
}

/// Constraint sets of a named estimator over `p` covariates.
pub fn named_spec(name: Estimator, p: usize) -> Result<ModelSpec> {
    use CoefConstraint::{Fixed, Free};
    if p == 0 {
        return Err(Error::DimensionMismatch("p must be at least 1".into()));
    }
    let zero = vec![Fixed(0.0); p];
    let free = vec![Free; p];
    let baseline = |first: CoefConstraint| {
        let mut v = vec![Free; p];
        v[0] = first;
        v
    };
    let (gamma, delta) = match name {
        Estimator::Anova => (zero.clone(), zero),
        Estimator::Ancova => (free, zero),
        Estimator::Anhecova => (free.clone(), free),
        Estimator::Did => (baseline(Fixed(1.0)), baseline(Fixed(0.0))),
        Estimator::Ldv => (free, baseline(Fixed(0.0))),
        Estimator::InteractionsOnly => (zero, free),
    };
    ModelSpec::with_default_names(gamma, delta)
}

/// n records of (A, X, Y) with optional positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    a: Vec<u8>,
    x: DMatrix<f64>,
    y: DVector<f64>,
    weights: Option<DVector<f64>>,
}

impl Dataset {
    pub fn new(a: Vec<u8>, x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let n = a.len();
        if x.nrows() != n || y.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "a has {} rows, x has {}, y has {}",
                n,
                x.nrows(),
                y.len()
            )));
        }
        if let Some(i) = a.iter().position(|&v| v > 1) {
            return Err(Error::InvalidData(format!("treatment at row {i} is {} (must be 0 or 1)", a[i])));
        }
        if n < x.ncols() + 2 {
            return Err(Error::InvalidData(format!(
                "n = {} is too small for p = {} (need n >= p + 2)",
                n,
                x.ncols()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariates"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("outcome"));
        }
        Ok(Self { a, x, y, weights: None })
    }

    /// Convenience constructor from row-major covariates.
    pub fn from_rows(a: Vec<u8>, x_rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let n = x_rows.len();
        let p = x_rows.first().map_or(0, Vec::len);
        if x_rows.iter().any(|r| r.len() != p) {
            return Err(Error::DimensionMismatch("ragged covariate rows".into()));
        }
        let flat: Vec<f64> = x_rows.iter().flatten().copied().collect();
        Self::new(a, DMatrix::from_row_slice(n, p, &flat), DVector::from_vec(y))
    }

    pub fn with_weights(mut self, w: DVector<f64>) -> Result<Self> {
        if w.len() != self.n() {
            return Err(Error::DimensionMismatch("weight vector length differs from n".into()));
        }
        if let Some(index) = w.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::NonPositiveWeight { index });
        }
        self.weights = Some(w);
        Ok(self)
    }

    pub fn without_weights(mut self) -> Self {
        self.weights = None;
        self
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn a(&self) -> &[u8] {
        &self.a
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn weights(&self) -> Option<&DVector<f64>> {
        self.weights.as_ref()
    }

    /// (n₀, n₁)
    pub fn arm_counts(&self) -> (usize, usize) {
        let n1 = self.a.iter().filter(|&&v| v == 1).count();
        (self.n() - n1, n1)
    }

    /// Column means X̄.
    pub fn x_mean(&self) -> DVector<f64> {
        let n = self.n() as f64;
        DVector::from_iterator(self.p(), self.x.column_iter().map(|c| c.sum() / n))
    }

    /// Empirical covariance of X with divisor n.
    pub fn x_cov(&self) -> DMatrix<f64> {
        let mean = self.x_mean();
        let mut centred = self.x.clone();
        for (mut col, m) in centred.column_iter_mut().zip(mean.iter()) {
            col.add_scalar_mut(-m);
        }
        centred.tr_mul(&centred) / self.n() as f64
    }

    /// Same data with a constant added to every covariate row.
    pub fn shifted(&self, c: &[f64]) -> Result<Self> {
        if c.len() != self.p() {
            return Err(Error::DimensionMismatch("shift length differs from p".into()));
        }
        let mut out = self.clone();
        for (mut col, s) in out.x.column_iter_mut().zip(c) {
            col.add_scalar_mut(*s);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use CoefConstraint::{Fixed, Free};

    #[test]
    fn named_specs_match_examples() {
        let s = named_spec(Estimator::Anhecova, 2).unwrap();
        assert_eq!(s.gamma(), &[Free, Free]);
        assert_eq!(s.delta(), &[Free, Free]);

        let s = named_spec(Estimator::Did, 3).unwrap();
        assert_eq!(s.gamma(), &[Fixed(1.0), Free, Free]);
        assert_eq!(s.delta(), &[Fixed(0.0), Free, Free]);

        let s = named_spec(Estimator::Anova, 1).unwrap();
        assert_eq!(s.gamma(), &[Fixed(0.0)]);
        assert_eq!(s.delta(), &[Fixed(0.0)]);

        let s = named_spec(Estimator::Ldv, 2).unwrap();
        assert_eq!(s.gamma(), &[Free, Free]);
        assert_eq!(s.delta(), &[Fixed(0.0), Free]);

        let s = named_spec(Estimator::Ancova, 2).unwrap();
        assert_eq!(s.unrestricted_gamma(), vec![0, 1]);
        assert!(s.unrestricted_delta().is_empty());
        assert!(s.has_no_interactions());
    }

    #[test]
    fn estimator_names_parse() {
        assert_eq!("anhecova".parse::<Estimator>().unwrap(), Estimator::Anhecova);
        assert_eq!("DiD".parse::<Estimator>().unwrap(), Estimator::Did);
        assert!(matches!("ols".parse::<Estimator>(), Err(Error::UnknownName(_))));
        assert!(named_spec(Estimator::Ldv, 0).is_err());
    }

    #[test]
    fn containment_rules() {
        assert!(Free.contains(&Free));
        assert!(Free.contains(&Fixed(2.0)));
        assert!(Fixed(2.0).contains(&Fixed(2.0)));
        assert!(!Fixed(2.0).contains(&Free));
        assert!(!Fixed(2.0).contains(&Fixed(1.0)));
    }

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::with_default_names(vec![Free], vec![Free, Free]).is_err());
        assert!(ModelSpec::with_default_names(vec![Fixed(f64::NAN)], vec![Free]).is_err());
        let s = named_spec(Estimator::Anova, 2).unwrap();
        assert!(s.clone().with_centering(Centering::KnownMean(vec![0.0])).is_err());
        assert!(s.with_centering(Centering::KnownMean(vec![0.0, 1.0])).is_ok());
    }

    #[test]
    fn dataset_validation() {
        let rows = vec![vec![0.0]; 4];
        assert!(Dataset::from_rows(vec![0, 1, 2, 0], &rows, vec![0.0; 4]).is_err());
        assert!(Dataset::from_rows(vec![0, 1, 1], &rows[..3], vec![0.0; 2]).is_err());
        assert!(Dataset::from_rows(vec![0, 1], &rows[..2], vec![0.0; 2]).is_err());
        let d = Dataset::from_rows(vec![0, 1, 1, 0], &rows, vec![1.0, f64::NAN, 0.0, 0.0]);
        assert_eq!(d.unwrap_err(), Error::NonFinite("outcome"));
        let d = Dataset::from_rows(vec![0, 1, 1, 0], &rows, vec![0.0; 4]).unwrap();
        assert_eq!(d.arm_counts(), (2, 2));
        let bad = d.clone().with_weights(DVector::from_vec(vec![1.0, 1.0, 0.0, 1.0]));
        assert_eq!(bad.unwrap_err(), Error::NonPositiveWeight { index: 2 });
    }

    #[test]
    fn covariance_uses_n_divisor() {
        let rows = vec![vec![1.0], vec![3.0], vec![1.0], vec![3.0]];
        let d = Dataset::from_rows(vec![0, 1, 0, 1], &rows, vec![0.0; 4]).unwrap();
        assert_eq!(d.x_mean()[0], 2.0);
        assert_eq!(d.x_cov()[(0, 0)], 1.0);
    }
}
