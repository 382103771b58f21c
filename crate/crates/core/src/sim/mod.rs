//! Seeded Monte Carlo engine: scenario draws, replicated fits, and bias/SD
//! aggregation.

mod report;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{fit_ols, fit_poisson_glm, fit_weighted};
use crate::model::{named_spec, Dataset, Estimator, ModelSpec};
use crate::population::{Law, LinearArm};
use crate::seed::rng_for;

pub use report::{MonteCarloCell, MonteCarloReport, CSV_HEADER};

/// Replications may fail (e.g. an empty arm); a cell with a larger failure
/// fraction is reported as NaN.
pub const MAX_FAIL_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    None,
    /// w = 1 / (π(X)(1 − π(X))) with the true propensity.
    InverseVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    LeastSquares,
    PoissonLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// "1" to "4" for the reference scenarios, otherwise a custom name.
    pub name: String,
    pub law: Law,
    pub n: usize,
    pub weighting: Weighting,
    pub fit: FitKind,
}

pub const DEFAULT_N: usize = 1000;

impl Scenario {
    /// Reference scenarios 1 to 4 with n = 1000.
    pub fn reference(id: u8) -> Result<Self> {
        let (law, weighting, fit) = match id {
            1 => (Law::scenario1(), Weighting::None, FitKind::LeastSquares),
            2 => (Law::scenario2(), Weighting::None, FitKind::PoissonLog),
            3 => (Law::scenario3(), Weighting::None, FitKind::LeastSquares),
            4 => (Law::scenario3(), Weighting::InverseVariance, FitKind::LeastSquares),
            other => return Err(Error::InvalidSimulation(format!("unknown scenario {other}; expected 1 to 4"))),
        };
        Ok(Scenario { name: id.to_string(), law, n: DEFAULT_N, weighting, fit })
    }

    pub fn custom(name: impl Into<String>, law: Law) -> Result<Self> {
        law.validate()?;
        Ok(Scenario { name: name.into(), law, n: DEFAULT_N, weighting: Weighting::None, fit: FitKind::LeastSquares })
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn p(&self) -> usize {
        self.law.p()
    }

    /// Whether assignment depends on X, in which case π grids are ignored.
    pub fn covariate_dependent(&self) -> bool {
        self.law.covariate_dependent()
    }

    pub fn beta_ate(&self) -> f64 {
        self.law.beta_ate()
    }

    fn seed_key(&self) -> u64 {
        self.name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
    }

    fn validate(&self) -> Result<()> {
        if self.n < self.p() + 2 {
            return Err(Error::InvalidSimulation(format!("n = {} is too small for p = {}", self.n, self.p())));
        }
        if self.weighting == Weighting::InverseVariance && !self.covariate_dependent() {
            return Err(Error::InvalidSimulation("inverse-variance weights need a propensity".into()));
        }
        Ok(())
    }
}

/// A simulated dataset with the potential outcomes kept for oracle use.
#[derive(Debug, Clone)]
pub struct SimDraw {
    pub data: Dataset,
    pub y1: Vec<f64>,
    pub y0: Vec<f64>,
}

impl SimDraw {
    pub fn sample_ate(&self) -> f64 {
        self.y1.iter().zip(&self.y0).map(|(a, b)| a - b).sum::<f64>() / self.y1.len() as f64
    }
}

fn draw_with<R: rand::Rng + ?Sized>(scenario: &Scenario, pi: f64, rng: &mut R) -> Result<SimDraw> {
    let units = scenario.law.draw(pi, scenario.n, rng);
    let y = units.observed();
    let data = Dataset::new(units.a.clone(), units.x.clone(), DVector::from_vec(y))?;
    let data = match scenario.weighting {
        Weighting::None => data,
        Weighting::InverseVariance => {
            let prop = units.propensity.as_ref().expect("validated: law has a propensity");
            data.with_weights(DVector::from_iterator(prop.len(), prop.iter().map(|p| 1.0 / (p * (1.0 - p)))))?
        }
    };
    Ok(SimDraw { data, y1: units.y1, y0: units.y0 })
}

/// One dataset from the scenario, deterministic in `seed`. `pi` is ignored
/// when assignment depends on X.
pub fn draw(scenario: &Scenario, pi: f64, seed: u64) -> Result<SimDraw> {
    scenario.validate()?;
    if !scenario.covariate_dependent() && !(pi > 0.0 && pi < 1.0) {
        return Err(Error::InvalidPi(pi));
    }
    draw_with(scenario, pi, &mut rng_for(seed, &[]))
}

/// A labelled model to fit in every replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub label: String,
    pub spec: ModelSpec,
}

impl ModelEntry {
    pub fn new(label: impl Into<String>, spec: ModelSpec) -> Self {
        ModelEntry { label: label.into(), spec }
    }

    pub fn named(e: Estimator, p: usize) -> Result<Self> {
        Ok(ModelEntry::new(e.name(), named_spec(e, p)?))
    }
}

fn fit_one(scenario: &Scenario, spec: &ModelSpec, data: &Dataset) -> Result<(f64, f64)> {
    let fit = match (scenario.fit, scenario.weighting) {
        (FitKind::PoissonLog, _) => fit_poisson_glm(spec, data)?,
        (FitKind::LeastSquares, Weighting::InverseVariance) => fit_weighted(spec, data)?,
        (FitKind::LeastSquares, Weighting::None) => fit_ols(spec, data)?,
    };
    if !fit.ate_hat.is_finite() {
        return Err(Error::NonFinite("ate_hat"));
    }
    Ok((fit.ate_hat, fit.ate_se))
}

/// Runs `reps` replications for every (model, π) cell. Datasets are keyed by
/// (seed, scenario, π index, replicate), so all models in a π cell see the
/// same draws. Output is identical for any thread count.
pub fn run_grid(
    scenario: &Scenario,
    models: &[ModelEntry],
    pis: &[f64],
    reps: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    scenario.validate()?;
    if reps == 0 {
        return Err(Error::InvalidSimulation("reps must be positive".into()));
    }
    if models.is_empty() {
        return Err(Error::InvalidSimulation("no models given".into()));
    }
    for m in models {
        if m.spec.p() != scenario.p() {
            return Err(Error::DimensionMismatch(format!(
                "model `{}` has {} covariates, scenario has {}",
                m.label,
                m.spec.p(),
                scenario.p()
            )));
        }
    }
    let grid: Vec<Option<f64>> = if scenario.covariate_dependent() {
        vec![None]
    } else {
        if pis.is_empty() {
            return Err(Error::InvalidSimulation("a π grid is required for this scenario".into()));
        }
        if let Some(bad) = pis.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::InvalidPi(*bad));
        }
        pis.iter().copied().map(Some).collect()
    };

    let beta_ate = scenario.beta_ate();
    let key = scenario.seed_key();
    let mut cells = Vec::with_capacity(grid.len() * models.len());
    for (k, pi) in grid.iter().enumerate() {
        let outcomes: Vec<Vec<Option<(f64, f64)>>> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = rng_for(seed, &[key, k as u64, r as u64]);
                match draw_with(scenario, pi.unwrap_or(0.5), &mut rng) {
                    Ok(d) => models.iter().map(|m| fit_one(scenario, &m.spec, &d.data).ok()).collect(),
                    Err(_) => vec![None; models.len()],
                }
            })
            .collect();
        for (j, m) in models.iter().enumerate() {
            let column: Vec<Option<(f64, f64)>> = outcomes.iter().map(|row| row[j]).collect();
            cells.push(MonteCarloCell::aggregate(&scenario.name, &m.label, *pi, scenario.n, seed, &column, beta_ate));
        }
    }
    Ok(MonteCarloReport { seed, cells })
}

pub const FIGURE1_PIS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

pub fn figure1_models() -> Vec<ModelEntry> {
    [Estimator::Anova, Estimator::Ancova, Estimator::Anhecova]
        .iter()
        .map(|&e| ModelEntry::named(e, 1).expect("p = 1 is valid"))
        .collect()
}

/// Scenarios 1 and 2 over π ∈ {0.1, …, 0.9} for ANOVA, ANCOVA and ANHECOVA.
pub fn figure1_data(reps: usize, seed: u64, n: usize) -> Result<MonteCarloReport> {
    let models = figure1_models();
    let mut cells = Vec::new();
    for id in [1, 2] {
        let scenario = Scenario::reference(id)?.with_n(n);
        cells.extend(run_grid(&scenario, &models, &FIGURE1_PIS, reps, seed)?.cells);
    }
    Ok(MonteCarloReport { seed, cells })
}

/// Population for the DiD against LDV comparison: X = (Y₀, X₂) ~ N(0, I),
/// Y(0) = b·Y₀ + 0.5·X₂ + s·e₀ and Y(1) = 1 + b·Y₀ + X₂ + s·e₁, with
/// s² = 1 − b² − 0.25 floored at 0.01 so that var Y(0) = 1 when |b| ≤ 0.86.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DidLdvConfig {
    pub n: usize,
    pub pi: f64,
    /// Coefficient of the baseline outcome in both arms.
    pub baseline_coef: f64,
}

impl Default for DidLdvConfig {
    fn default() -> Self {
        DidLdvConfig { n: DEFAULT_N, pi: 0.5, baseline_coef: 0.7 }
    }
}

impl DidLdvConfig {
    pub fn law(&self) -> Law {
        let b = self.baseline_coef;
        let s = (1.0 - b * b - 0.25).max(0.01).sqrt();
        Law::GaussianArms {
            x_mean: vec![0.0, 0.0],
            sigma: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            treated: LinearArm { intercept: 1.0, slope: vec![b, 1.0], noise_sd: s },
            control: LinearArm { intercept: 0.0, slope: vec![b, 0.5], noise_sd: s },
        }
    }

    pub fn models() -> Result<Vec<ModelEntry>> {
        let names = vec!["Y0".to_string(), "X2".to_string()];
        [Estimator::Did, Estimator::Ldv]
            .iter()
            .map(|&e| Ok(ModelEntry::new(e.name(), named_spec(e, 2)?.renamed(names.clone())?)))
            .collect()
    }
}

/// Replicated DiD and LDV fits on a population with the baseline outcome as
/// the first covariate.
pub fn did_vs_ldv_experiment(reps: usize, seed: u64, config: DidLdvConfig) -> Result<MonteCarloReport> {
    let scenario = Scenario::custom("did-ldv", config.law())?.with_n(config.n);
    run_grid(&scenario, &DidLdvConfig::models()?, &[config.pi], reps, seed)
}
