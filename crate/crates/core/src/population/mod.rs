//! Population least-squares solutions and asymptotic variances of the
//! estimator class.
//!
//! Everything is driven by per-arm second moments of (1, X, Y). Within an arm
//! the population residual is linear in (1, X, Y), so E[ε² | A = a] and hence
//! V = E[ε² | A=1]/π + E[ε² | A=0]/(1−π) follow exactly from those moments.

mod law;
pub mod random;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::Coefficients;
use crate::linalg::{inverse_gram, quad, solve_gram};
use crate::model::{Centering, Coef, ModelSpec};
use crate::seed::rng_for;

pub use law::{Law, LinearArm, LogLinearArm, Units};
pub(crate) use law::to_matrix;

/// Draws used when a population has a sampler but no exact moments.
pub const DEFAULT_MC_DRAWS: usize = 1_000_000;
const MC_BATCHES: usize = 20;

/// Per-arm first and second moments. `omega*` are E[(X − E X) Y | A = a];
/// `ey2_*` are E[Y² | A = a].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationMoments {
    pub sigma: Vec<Vec<f64>>,
    pub omega1: Vec<f64>,
    pub omega0: Vec<f64>,
    pub mu1: f64,
    pub mu0: f64,
    pub ey2_1: f64,
    pub ey2_0: f64,
    /// E X; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_mean: Option<Vec<f64>>,
}

impl PopulationMoments {
    pub fn p(&self) -> usize {
        self.sigma.len()
    }

    pub fn sigma_matrix(&self) -> DMatrix<f64> {
        to_matrix(&self.sigma)
    }

    pub fn mean(&self) -> DVector<f64> {
        match &self.x_mean {
            Some(m) => DVector::from_column_slice(m),
            None => DVector::zeros(self.p()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p();
        if p == 0 {
            return Err(Error::InvalidPopulation("at least one covariate is required".into()));
        }
        if self.sigma.iter().any(|r| r.len() != p) || self.omega1.len() != p || self.omega0.len() != p {
            return Err(Error::InvalidPopulation("sigma must be p × p and omegas of length p".into()));
        }
        if matches!(&self.x_mean, Some(m) if m.len() != p) {
            return Err(Error::InvalidPopulation("x_mean must have length p".into()));
        }
        let all = self
            .sigma
            .iter()
            .flatten()
            .chain(&self.omega1)
            .chain(&self.omega0)
            .chain([&self.mu1, &self.mu0, &self.ey2_1, &self.ey2_0])
            .chain(self.x_mean.iter().flatten());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("population moments"));
        }
        let s = self.sigma_matrix();
        if (&s - s.transpose()).amax() > 1e-12 * s.amax().max(1.0) {
            return Err(Error::InvalidPopulation("sigma is not symmetric".into()));
        }
        if s.clone().cholesky().is_none() {
            return Err(Error::InvalidPopulation("sigma is not positive definite".into()));
        }
        // E[Y²|a] must dominate what the arm's linear projection explains
        let si = inverse_gram(&s, &default_labels(p))?;
        for (mu, om, y2, arm) in [(self.mu1, &self.omega1, self.ey2_1, 1), (self.mu0, &self.omega0, self.ey2_0, 0)] {
            let o = DVector::from_column_slice(om);
            let explained = mu * mu + quad(&o, &si, &o);
            if y2 < explained - 1e-9 * y2.abs().max(1.0) {
                return Err(Error::InvalidPopulation(format!("E[Y²|A={arm}] is smaller than its explained part")));
            }
        }
        Ok(())
    }
}

fn default_labels(p: usize) -> Vec<String> {
    crate::model::default_names(p)
}

/// A super-population: assignment probability plus exact moments, a sampler,
/// or both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub pi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<PopulationMoments>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<Law>,
}

impl PopulationSpec {
    pub fn new(pi: f64, moments: Option<PopulationMoments>, sampler: Option<Law>) -> Result<Self> {
        if !(pi > 0.0 && pi < 1.0) {
            return Err(Error::InvalidPi(pi));
        }
        if moments.is_none() && sampler.is_none() {
            return Err(Error::InvalidPopulation("either moments or a sampler is required".into()));
        }
        if let Some(m) = &moments {
            m.validate()?;
        }
        if let Some(l) = &sampler {
            l.validate()?;
            if let Some(m) = &moments {
                if m.p() != l.p() {
                    return Err(Error::DimensionMismatch("moments and sampler disagree on p".into()));
                }
            }
        }
        Ok(PopulationSpec { pi, moments, sampler })
    }

    pub fn from_moments(pi: f64, moments: PopulationMoments) -> Result<Self> {
        Self::new(pi, Some(moments), None)
    }

    /// Attaches the law's exact moments when it has them.
    pub fn from_law(pi: f64, law: Law) -> Result<Self> {
        Self::new(pi, law.exact_moments(), Some(law))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: PopulationSpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidPopulation(format!("bad population JSON: {e}")))?;
        Self::new(raw.pi, raw.moments, raw.sampler)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("population serialises")
    }

    pub fn p(&self) -> usize {
        match (&self.moments, &self.sampler) {
            (Some(m), _) => m.p(),
            (None, Some(l)) => l.p(),
            (None, None) => unreachable!("validated on construction"),
        }
    }

    pub fn with_pi(&self, pi: f64) -> Result<Self> {
        Self::new(pi, self.moments.clone(), self.sampler.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationSolution {
    pub theta: Coefficients,
    pub beta_ate: f64,
    /// Set when the moments were estimated from sampler draws.
    pub approximate: bool,
}

/// A population quantity, with a Monte Carlo standard error when it was
/// computed from sampled moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PopulationValue {
    pub value: f64,
    pub mc_se: Option<f64>,
}

/// Mean and standard error of a Monte Carlo average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub mc_se: f64,
}

/// Moment calculus for one model evaluation: covariates centred at `c`, so
/// that X − c has mean d = E X − c.
struct Calculus {
    pi: f64,
    p: usize,
    sigma: DMatrix<f64>,
    /// E[(1, X−c)(1, X−c)ᵀ]
    gram: DMatrix<f64>,
    /// E[(1, X−c) Y | A = a], indexed by a
    cross: [DVector<f64>; 2],
    ey2: [f64; 2],
    mu: [f64; 2],
}

impl Calculus {
    fn new(m: &PopulationMoments, pi: f64, center: &DVector<f64>) -> Self {
        let p = m.p();
        let sigma = m.sigma_matrix();
        let d = m.mean() - center;
        let mut gram = DMatrix::zeros(p + 1, p + 1);
        gram[(0, 0)] = 1.0;
        gram.view_mut((0, 1), (1, p)).copy_from(&d.transpose());
        gram.view_mut((1, 0), (p, 1)).copy_from(&d);
        gram.view_mut((1, 1), (p, p)).copy_from(&(&sigma + &d * d.transpose()));
        let cross = |mu: f64, om: &[f64]| {
            let mut c = DVector::zeros(p + 1);
            c[0] = mu;
            c.rows_mut(1, p).copy_from(&(DVector::from_column_slice(om) + &d * mu));
            c
        };
        Calculus {
            pi,
            p,
            sigma,
            gram,
            cross: [cross(m.mu0, &m.omega0), cross(m.mu1, &m.omega1)],
            ey2: [m.ey2_0, m.ey2_1],
            mu: [m.mu0, m.mu1],
        }
    }

    /// Maps u = (1, X−c) to F = (1, a, X−c, a(X−c)).
    fn lift(&self, a: usize) -> DMatrix<f64> {
        let p = self.p;
        let af = a as f64;
        let mut l = DMatrix::zeros(2 + 2 * p, p + 1);
        l[(0, 0)] = 1.0;
        l[(1, 0)] = af;
        for j in 0..p {
            l[(2 + j, 1 + j)] = 1.0;
            l[(2 + p + j, 1 + j)] = af;
        }
        l
    }

    /// Full θ = (α, β, γ, δ) minimising E[(Y − θᵀF)²] under the spec's constraints.
    fn solve(&self, spec: &ModelSpec) -> Result<DVector<f64>> {
        let p = self.p;
        let q = 2 + 2 * p;
        let (l0, l1) = (self.lift(0), self.lift(1));
        let m = (&l1 * &self.gram * l1.transpose()) * self.pi + (&l0 * &self.gram * l0.transpose()) * (1.0 - self.pi);
        let h = (&l1 * &self.cross[1]) * self.pi + (&l0 * &self.cross[0]) * (1.0 - self.pi);

        let mut theta = DVector::zeros(q);
        let mut free = vec![0, 1];
        let mut labels: Vec<String> = vec!["1".into(), "A".into()];
        for j in 0..p {
            match spec.gamma()[j].fixed_value() {
                Some(v) => theta[2 + j] = v,
                None => {
                    free.push(2 + j);
                    labels.push(Coef::Main(j).label(spec.covariates()));
                }
            }
        }
        for j in 0..p {
            match spec.delta()[j].fixed_value() {
                Some(v) => theta[2 + p + j] = v,
                None => {
                    free.push(2 + p + j);
                    labels.push(Coef::Interaction(j).label(spec.covariates()));
                }
            }
        }
        let mff = m.select_rows(&free).select_columns(&free);
        let rhs = h.select_rows(&free) - m.select_rows(&free) * &theta;
        let sol = solve_gram(&mff, &rhs, &labels)?;
        for (k, &i) in free.iter().enumerate() {
            theta[i] = sol[k];
        }
        Ok(theta)
    }

    /// E[ε² | A = a] at θ.
    fn resid_m2(&self, theta: &DVector<f64>, a: usize) -> f64 {
        let l = self.lift(a);
        let t = l.transpose() * theta;
        let v = self.ey2[a] - 2.0 * t.dot(&self.cross[a]) + quad(&t, &self.gram, &t);
        v.max(0.0)
    }

    fn variance(&self, theta: &DVector<f64>) -> f64 {
        self.resid_m2(theta, 1) / self.pi + self.resid_m2(theta, 0) / (1.0 - self.pi)
    }

    fn coefficients(&self, theta: &DVector<f64>) -> Coefficients {
        let p = self.p;
        Coefficients {
            alpha: theta[0],
            beta: theta[1],
            gamma: theta.rows(2, p).iter().copied().collect(),
            delta: theta.rows(2 + p, p).iter().copied().collect(),
        }
    }

    fn delta(&self, theta: &DVector<f64>) -> DVector<f64> {
        theta.rows(2 + self.p, self.p).into_owned()
    }
}

fn check_dims(spec: &ModelSpec, pop: &PopulationSpec) -> Result<()> {
    if spec.p() != pop.p() {
        return Err(Error::DimensionMismatch(format!("model has {} covariates, population has {}", spec.p(), pop.p())));
    }
    Ok(())
}

/// Centre implied by the spec: the known vector, or the true mean for
/// empirical centring (its probability limit).
fn center_for(spec: &ModelSpec, m: &PopulationMoments) -> DVector<f64> {
    match spec.centering() {
        Centering::KnownMean(mu) => DVector::from_column_slice(mu),
        Centering::Empirical => m.mean(),
    }
}

/// Exact moments, or pooled and per-batch moments estimated from the sampler.
enum MomentSource<'a> {
    Exact(&'a PopulationMoments),
    Sampled { pooled: PopulationMoments, batches: Vec<PopulationMoments> },
}

fn moment_source(pop: &PopulationSpec) -> Result<MomentSource<'_>> {
    if let Some(m) = &pop.moments {
        return Ok(MomentSource::Exact(m));
    }
    let law = pop.sampler.as_ref().ok_or(Error::MissingMoments)?;
    if law.covariate_dependent() {
        return Err(Error::CovariateDependentAssignment);
    }
    let (pooled, batches) = sample_moments(law, DEFAULT_MC_DRAWS, 0);
    Ok(MomentSource::Sampled { pooled, batches })
}

/// Estimates per-arm moments from potential-outcome draws, returning the
/// pooled estimate and one estimate per batch.
pub fn sample_moments(law: &Law, n_draws: usize, seed: u64) -> (PopulationMoments, Vec<PopulationMoments>) {
    let per = n_draws.div_ceil(MC_BATCHES).max(2);
    let sums: Vec<RawSums> = (0..MC_BATCHES)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_for(seed, &[0x006d_6f6d, b as u64]);
            RawSums::from_units(&law.draw(0.5, per, &mut rng))
        })
        .collect();
    let pooled = sums.iter().skip(1).fold(sums[0].clone(), |acc, s| acc.merge(s));
    (pooled.moments(), sums.iter().map(RawSums::moments).collect())
}

#[derive(Debug, Clone)]
struct RawSums {
    n: f64,
    sx: DVector<f64>,
    sxx: DMatrix<f64>,
    sy: [f64; 2],
    sxy: [DVector<f64>; 2],
    syy: [f64; 2],
}

impl RawSums {
    fn from_units(u: &Units) -> Self {
        let x = &u.x;
        let y0 = DVector::from_column_slice(&u.y0);
        let y1 = DVector::from_column_slice(&u.y1);
        let ones = DVector::from_element(x.nrows(), 1.0);
        RawSums {
            n: x.nrows() as f64,
            sx: x.tr_mul(&ones),
            sxx: x.tr_mul(x),
            sy: [y0.sum(), y1.sum()],
            sxy: [x.tr_mul(&y0), x.tr_mul(&y1)],
            syy: [y0.norm_squared(), y1.norm_squared()],
        }
    }

    fn merge(&self, o: &RawSums) -> RawSums {
        RawSums {
            n: self.n + o.n,
            sx: &self.sx + &o.sx,
            sxx: &self.sxx + &o.sxx,
            sy: [self.sy[0] + o.sy[0], self.sy[1] + o.sy[1]],
            sxy: [&self.sxy[0] + &o.sxy[0], &self.sxy[1] + &o.sxy[1]],
            syy: [self.syy[0] + o.syy[0], self.syy[1] + o.syy[1]],
        }
    }

    fn moments(&self) -> PopulationMoments {
        let n = self.n;
        let m = &self.sx / n;
        let sigma = &self.sxx / n - &m * m.transpose();
        let arm = |a: usize| {
            let mu = self.sy[a] / n;
            let omega = &self.sxy[a] / n - &m * mu;
            (mu, omega.iter().copied().collect::<Vec<_>>(), self.syy[a] / n)
        };
        let (mu1, omega1, ey2_1) = arm(1);
        let (mu0, omega0, ey2_0) = arm(0);
        let p = m.len();
        PopulationMoments {
            sigma: (0..p).map(|i| (0..p).map(|j| sigma[(i, j)]).collect()).collect(),
            omega1,
            omega0,
            mu1,
            mu0,
            ey2_1,
            ey2_0,
            x_mean: Some(m.iter().copied().collect()),
        }
    }
}

/// Evaluates `f` on exact moments, or on sampled moments with a batch-means
/// standard error.
fn evaluate<F>(pop: &PopulationSpec, f: F) -> Result<PopulationValue>
where
    F: Fn(&PopulationMoments) -> Result<f64>,
{
    match moment_source(pop)? {
        MomentSource::Exact(m) => Ok(PopulationValue { value: f(m)?, mc_se: None }),
        MomentSource::Sampled { pooled, batches } => {
            let value = f(&pooled)?;
            let vals = batches.iter().map(&f).collect::<Result<Vec<_>>>()?;
            let k = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / k;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
            Ok(PopulationValue { value, mc_se: Some((var / k).sqrt()) })
        }
    }
}

/// Population coefficients of the spec and the ATE.
pub fn solve_population(spec: &ModelSpec, pop: &PopulationSpec) -> Result<PopulationSolution> {
    check_dims(spec, pop)?;
    let (m, approximate) = match moment_source(pop)? {
        MomentSource::Exact(m) => (m.clone(), false),
        MomentSource::Sampled { pooled, .. } => (pooled, true),
    };
    let calc = Calculus::new(&m, pop.pi, &center_for(spec, &m));
    let theta = calc.solve(spec)?;
    Ok(PopulationSolution { theta: calc.coefficients(&theta), beta_ate: calc.mu[1] - calc.mu[0], approximate })
}

/// V = E[(A−π)²ε²]/(π²(1−π)²): n times the asymptotic variance of β̂ with
/// covariates centred at the spec's known vector.
pub fn asymptotic_variance_known_mean(spec: &ModelSpec, pop: &PopulationSpec) -> Result<PopulationValue> {
    check_dims(spec, pop)?;
    evaluate(pop, |m| {
        let calc = Calculus::new(m, pop.pi, &center_for(spec, m));
        Ok(calc.variance(&calc.solve(spec)?))
    })
}

/// Ṽ = V + δₛᵀΣ(2δ_f − δₛ): n times the asymptotic variance of β̃ under
/// empirical centring.
pub fn asymptotic_variance_centered(spec: &ModelSpec, pop: &PopulationSpec) -> Result<PopulationValue> {
    check_dims(spec, pop)?;
    evaluate(pop, |m| centered_variance(spec, m, pop.pi))
}

fn centered_variance(spec: &ModelSpec, m: &PopulationMoments, pi: f64) -> Result<f64> {
    let calc = Calculus::new(m, pi, &m.mean());
    let ts = calc.solve(spec)?;
    let tf = calc.solve(&spec.full_model())?;
    let (ds, df) = (calc.delta(&ts), calc.delta(&tf));
    Ok(calc.variance(&ts) + quad(&ds, &calc.sigma, &(2.0 * &df - &ds)))
}

/// Ṽ₂ − Ṽ₁ = (d_γ + (1−π)d_δ)ᵀΣ(d_γ + (1−π)d_δ) / (π(1−π)) for a pair
/// satisfying the centred nesting condition.
pub fn variance_gap_theorem2(spec1: &ModelSpec, spec2: &ModelSpec, pop: &PopulationSpec) -> Result<PopulationValue> {
    check_dims(spec1, pop)?;
    check_dims(spec2, pop)?;
    if !spec1.same_constraints(spec2) {
        let verdict = crate::dominance::check_centered(spec1, spec2, pop.pi)?;
        if !verdict.is_certified() {
            return Err(Error::ConditionViolated(verdict.explanation.summary()));
        }
    }
    let pi = pop.pi;
    evaluate(pop, |m| {
        let calc = Calculus::new(m, pi, &m.mean());
        let (t1, t2) = (calc.solve(spec1)?, calc.solve(spec2)?);
        let p = calc.p;
        let d = &t1 - &t2;
        let v = d.rows(2, p) + d.rows(2 + p, p) * (1.0 - pi);
        Ok(quad(&v, &calc.sigma, &v) / (pi * (1.0 - pi)))
    })
}

/// Full-model population coefficients (γ_f, δ_f) = (Σ⁻¹Ω₀, Σ⁻¹(Ω₁ − Ω₀)).
pub fn full_model_coefficients(m: &PopulationMoments) -> Result<(DVector<f64>, DVector<f64>)> {
    let si = inverse_gram(&m.sigma_matrix(), &default_labels(m.p()))?;
    let o1 = DVector::from_column_slice(&m.omega1);
    let o0 = DVector::from_column_slice(&m.omega0);
    Ok((&si * &o0, &si * (o1 - &o0)))
}

/// V_ANCOVA − V_ANOVA = (γ_f + πδ_f)ᵀΣ((3π−2)δ_f − γ_f) / (π(1−π)).
pub fn ancova_anova_gap(pop: &PopulationSpec) -> Result<f64> {
    let m = pop.moments.as_ref().ok_or(Error::MissingMoments)?;
    let pi = pop.pi;
    let (gf, df) = full_model_coefficients(m)?;
    let s = m.sigma_matrix();
    let u = &gf + &df * pi;
    let w = &df * (3.0 * pi - 2.0) - &gf;
    Ok(quad(&u, &s, &w) / (pi * (1.0 - pi)))
}

/// Ṽ(interactions only) − Ṽ(ANOVA) = Ω₁ᵀΣ⁻¹(Ω₁ − 2Ω₀) − Ω₁ᵀΣ⁻¹Ω₁/π.
pub fn interactions_only_anova_gap(pop: &PopulationSpec) -> Result<f64> {
    let m = pop.moments.as_ref().ok_or(Error::MissingMoments)?;
    let si = inverse_gram(&m.sigma_matrix(), &default_labels(m.p()))?;
    let o1 = DVector::from_column_slice(&m.omega1);
    let o0 = DVector::from_column_slice(&m.omega0);
    Ok(quad(&o1, &si, &(&o1 - 2.0 * o0)) - quad(&o1, &si, &o1) / pop.pi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CounterexampleKind {
    /// ANCOVA has larger variance than ANOVA.
    AncovaWorse,
    /// Under empirical centring the interactions-only estimator has larger
    /// variance than ANOVA.
    InteractionsOnlyWorseCentered,
}

/// Single-covariate Gaussian-arm population (Σ = 1, unit noise) on which the
/// named ordering fails.
///
/// `AncovaWorse` uses δ_f = 1, γ_f = π − 1, giving a gap of
/// (2π−1)²/(π(1−π)); it needs π ≠ 1/2. `InteractionsOnlyWorseCentered` uses
/// Ω₁ = 1, Ω₀ = −k with k = max(1/2, 1/π − 1), giving a gap of 1 + 2k − 1/π.
pub fn make_counterexample(kind: CounterexampleKind, pi: f64) -> Result<PopulationSpec> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(Error::InvalidPi(pi));
    }
    let (b1, b0) = match kind {
        CounterexampleKind::AncovaWorse => {
            if (pi - 0.5).abs() < 1e-12 {
                return Err(Error::CounterexampleUnavailable("ANCOVA cannot lose to ANOVA at π = 1/2".into()));
            }
            let gf = pi - 1.0;
            (gf + 1.0, gf)
        }
        CounterexampleKind::InteractionsOnlyWorseCentered => {
            let k = f64::max(0.5, 1.0 / pi - 1.0);
            (1.0, -k)
        }
    };
    let law = Law::GaussianArms {
        x_mean: vec![0.0],
        sigma: vec![vec![1.0]],
        treated: LinearArm { intercept: 1.0, slope: vec![b1], noise_sd: 1.0 },
        control: LinearArm { intercept: 0.0, slope: vec![b0], noise_sd: 1.0 },
    };
    PopulationSpec::from_law(pi, law)
}

/// mean(Y(1) − Y(0)) over `n_draws` sampler draws.
pub fn approximate_beta_ate(pop: &PopulationSpec, n_draws: usize, seed: u64) -> Result<McEstimate> {
    let law = pop.sampler.as_ref().ok_or(Error::MissingSampler)?;
    if n_draws < 2 {
        return Err(Error::InvalidSimulation("at least two draws are required".into()));
    }
    const CHUNK: usize = 100_000;
    let chunks = n_draws.div_ceil(CHUNK);
    let parts: Vec<(f64, f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(n_draws - c * CHUNK);
            let u = law.draw(pop.pi, len, &mut rng_for(seed, &[0x617465, c as u64]));
            let diffs: Vec<f64> = u.y1.iter().zip(&u.y0).map(|(a, b)| a - b).collect();
            let m = diffs.iter().sum::<f64>() / len as f64;
            let ss = diffs.iter().map(|d| (d - m).powi(2)).sum::<f64>();
            (len as f64, m, ss)
        })
        .collect();
    // Chan et al. pairwise combination, in chunk order
    let (n, mean, ss) = parts.iter().skip(1).fold(parts[0], |(na, ma, sa), &(nb, mb, sb)| {
        let n = na + nb;
        let delta = mb - ma;
        (n, ma + delta * nb / n, sa + sb + delta * delta * na * nb / n)
    });
    Ok(McEstimate { value: mean, mc_se: (ss / (n - 1.0) / n).sqrt() })
}
