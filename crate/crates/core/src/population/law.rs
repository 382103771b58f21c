use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::PopulationMoments;
use crate::error::{Error, Result};

/// Y(a) = intercept + slopeᵀ(X − E X) + noise_sd · e, e ~ N(0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearArm {
    pub intercept: f64,
    pub slope: Vec<f64>,
    pub noise_sd: f64,
}

/// Y(a) ~ Poisson(exp(intercept + slope · (X − E X))).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLinearArm {
    pub intercept: f64,
    pub slope: f64,
}

/// Data-generating laws the crate can sample from. Covariates are drawn on
/// their raw scale; outcome and propensity formulas use the covariate
/// centred at its population mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Law {
    /// X ~ N(x_mean, sigma), linear Gaussian outcome per arm, A ~ Bernoulli(π).
    GaussianArms {
        x_mean: Vec<f64>,
        sigma: Vec<Vec<f64>>,
        treated: LinearArm,
        control: LinearArm,
    },
    /// Scalar X ~ N(x_mean, 1), Poisson log-linear outcome per arm, A ~ Bernoulli(π).
    PoissonLog {
        x_mean: f64,
        treated: LogLinearArm,
        control: LogLinearArm,
    },
    /// Scalar X ~ N(x_mean, 1); Y(1) = 7 + X + e₁, Y(0) = 2 − X + X² + e₀,
    /// logit P(A = 1 | X) = 4 − 2X.
    QuadraticPropensity { x_mean: f64 },
}

/// One batch of sampled units with both potential outcomes retained.
#[derive(Debug, Clone)]
pub struct Units {
    pub a: Vec<u8>,
    /// Raw-scale covariates, n × p.
    pub x: DMatrix<f64>,
    pub y1: Vec<f64>,
    pub y0: Vec<f64>,
    /// P(A = 1 | X) per unit when assignment depends on X.
    pub propensity: Option<Vec<f64>>,
}

impl Units {
    pub fn observed(&self) -> Vec<f64> {
        self.a.iter().zip(self.y1.iter().zip(&self.y0)).map(|(&a, (y1, y0))| if a == 1 { *y1 } else { *y0 }).collect()
    }
}

fn expit(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

impl Law {
    /// Gaussian covariate centred at 2 with unit variance; Y(1) = 5 + 2.5X + e₁,
    /// Y(0) = 3 + X + e₀.
    pub fn scenario1() -> Self {
        Law::GaussianArms {
            x_mean: vec![2.0],
            sigma: vec![vec![1.0]],
            treated: LinearArm { intercept: 5.0, slope: vec![2.5], noise_sd: 1.0 },
            control: LinearArm { intercept: 3.0, slope: vec![1.0], noise_sd: 1.0 },
        }
    }

    /// μ₁ = exp(3 + 0.6X), μ₀ = exp(1 + 0.6X).
    pub fn scenario2() -> Self {
        Law::PoissonLog {
            x_mean: 2.0,
            treated: LogLinearArm { intercept: 3.0, slope: 0.6 },
            control: LogLinearArm { intercept: 1.0, slope: 0.6 },
        }
    }

    pub fn scenario3() -> Self {
        Law::QuadraticPropensity { x_mean: 2.0 }
    }

    pub fn p(&self) -> usize {
        match self {
            Law::GaussianArms { x_mean, .. } => x_mean.len(),
            _ => 1,
        }
    }

    pub fn covariate_dependent(&self) -> bool {
        matches!(self, Law::QuadraticPropensity { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Law::GaussianArms { x_mean, sigma, treated, control } => {
                let p = x_mean.len();
                if p == 0 {
                    return Err(Error::InvalidPopulation("at least one covariate is required".into()));
                }
                if sigma.len() != p || sigma.iter().any(|r| r.len() != p) {
                    return Err(Error::InvalidPopulation("sigma must be p × p".into()));
                }
                for arm in [treated, control] {
                    if arm.slope.len() != p {
                        return Err(Error::InvalidPopulation("slope length must equal p".into()));
                    }
                    if !(arm.noise_sd >= 0.0) {
                        return Err(Error::InvalidPopulation("noise_sd must be non-negative".into()));
                    }
                }
                cholesky(sigma).map(|_| ())
            }
            Law::PoissonLog { .. } | Law::QuadraticPropensity { .. } => Ok(()),
        }
    }

    /// Exact per-arm second moments, where they have closed forms.
    pub fn exact_moments(&self) -> Option<PopulationMoments> {
        match self {
            Law::GaussianArms { x_mean, sigma, treated, control } => {
                let s = to_matrix(sigma);
                let arm = |l: &LinearArm| {
                    let b = DVector::from_column_slice(&l.slope);
                    let omega = &s * &b;
                    let y2 = l.intercept * l.intercept + b.dot(&omega) + l.noise_sd * l.noise_sd;
                    (l.intercept, omega.iter().copied().collect::<Vec<_>>(), y2)
                };
                let (mu1, omega1, ey2_1) = arm(treated);
                let (mu0, omega0, ey2_0) = arm(control);
                Some(PopulationMoments {
                    sigma: sigma.clone(),
                    omega1,
                    omega0,
                    mu1,
                    mu0,
                    ey2_1,
                    ey2_0,
                    x_mean: Some(x_mean.clone()),
                })
            }
            Law::PoissonLog { x_mean, treated, control } => {
                // X − E X ~ N(0,1): E e^{sX} = e^{s²/2}, E X e^{sX} = s e^{s²/2}
                let arm = |l: &LogLinearArm| {
                    let m = (l.intercept + 0.5 * l.slope * l.slope).exp();
                    let m2 = (2.0 * l.intercept + 2.0 * l.slope * l.slope).exp();
                    (m, l.slope * m, m + m2)
                };
                let (mu1, o1, ey2_1) = arm(treated);
                let (mu0, o0, ey2_0) = arm(control);
                Some(PopulationMoments {
                    sigma: vec![vec![1.0]],
                    omega1: vec![o1],
                    omega0: vec![o0],
                    mu1,
                    mu0,
                    ey2_1,
                    ey2_0,
                    x_mean: Some(vec![*x_mean]),
                })
            }
            Law::QuadraticPropensity { .. } => None,
        }
    }

    /// Analytic E[Y(1) − Y(0)].
    pub fn beta_ate(&self) -> f64 {
        match self {
            Law::GaussianArms { treated, control, .. } => treated.intercept - control.intercept,
            Law::PoissonLog { treated, control, .. } => {
                (treated.intercept + 0.5 * treated.slope.powi(2)).exp() - (control.intercept + 0.5 * control.slope.powi(2)).exp()
            }
            // E[5 + 2X − X²] with X ~ N(0, 1)
            Law::QuadraticPropensity { .. } => 4.0,
        }
    }

    /// Marginal P(A = 1). Equals `pi` unless assignment depends on X.
    pub fn marginal_pi(&self, pi: f64) -> f64 {
        match self {
            Law::QuadraticPropensity { .. } => {
                // trapezoid rule against the standard normal density
                let (lo, hi, k) = (-12.0, 12.0, 24_001);
                let h = (hi - lo) / (k - 1) as f64;
                let mut acc = 0.0;
                for i in 0..k {
                    let x = lo + i as f64 * h;
                    let w = if i == 0 || i == k - 1 { 0.5 } else { 1.0 };
                    acc += w * expit(4.0 - 2.0 * x) * (-0.5 * x * x).exp();
                }
                acc * h / (2.0 * std::f64::consts::PI).sqrt()
            }
            _ => pi,
        }
    }

    /// Draws n iid units. `pi` is the Bernoulli assignment probability and is
    /// ignored by laws with covariate-dependent assignment.
    pub fn draw<R: Rng + ?Sized>(&self, pi: f64, n: usize, rng: &mut R) -> Units {
        match self {
            Law::GaussianArms { x_mean, sigma, treated, control } => {
                let p = x_mean.len();
                let l = cholesky(sigma).expect("validated covariance");
                let mut x = DMatrix::zeros(n, p);
                let mut y1 = Vec::with_capacity(n);
                let mut y0 = Vec::with_capacity(n);
                let mut u = DVector::zeros(p);
                let mut xc = DVector::zeros(p);
                for i in 0..n {
                    for k in 0..p {
                        u[k] = std_normal(rng);
                    }
                    xc.gemv(1.0, &l, &u, 0.0);
                    for k in 0..p {
                        x[(i, k)] = x_mean[k] + xc[k];
                    }
                    let lin = |arm: &LinearArm| arm.intercept + arm.slope.iter().zip(xc.iter()).map(|(b, v)| b * v).sum::<f64>();
                    let (m1, m0) = (lin(treated), lin(control));
                    y1.push(m1 + treated.noise_sd * std_normal(rng));
                    y0.push(m0 + control.noise_sd * std_normal(rng));
                }
                let a = (0..n).map(|_| u8::from(rng.random_bool(pi))).collect();
                Units { a, x, y1, y0, propensity: None }
            }
            Law::PoissonLog { x_mean, treated, control } => {
                let xc: Vec<f64> = (0..n).map(|_| std_normal(rng)).collect();
                let mut y1 = Vec::with_capacity(n);
                let mut y0 = Vec::with_capacity(n);
                for &v in &xc {
                    y1.push(poisson((treated.intercept + treated.slope * v).exp(), rng));
                    y0.push(poisson((control.intercept + control.slope * v).exp(), rng));
                }
                let a = (0..n).map(|_| u8::from(rng.random_bool(pi))).collect();
                let x = DMatrix::from_iterator(n, 1, xc.iter().map(|v| v + x_mean));
                Units { a, x, y1, y0, propensity: None }
            }
            Law::QuadraticPropensity { x_mean } => {
                let mut x = DMatrix::zeros(n, 1);
                let mut y1 = Vec::with_capacity(n);
                let mut y0 = Vec::with_capacity(n);
                let mut prop = Vec::with_capacity(n);
                let mut a = Vec::with_capacity(n);
                for i in 0..n {
                    let v = std_normal(rng);
                    x[(i, 0)] = v + x_mean;
                    y1.push(7.0 + v + std_normal(rng));
                    y0.push(2.0 - v + v * v + std_normal(rng));
                    let pr = expit(4.0 - 2.0 * v);
                    prop.push(pr);
                    a.push(u8::from(rng.random::<f64>() < pr));
                }
                Units { a, x, y1, y0, propensity: Some(prop) }
            }
        }
    }
}

fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    Poisson::new(lambda).expect("positive rate").sample(rng)
}

pub(crate) fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let p = rows.len();
    DMatrix::from_fn(p, p, |i, j| rows[i][j])
}

fn cholesky(sigma: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let s = to_matrix(sigma);
    if (&s - s.transpose()).amax() > 1e-12 * s.amax().max(1.0) {
        return Err(Error::InvalidPopulation("sigma is not symmetric".into()));
    }
    s.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::InvalidPopulation("sigma is not positive definite".into()))
}
