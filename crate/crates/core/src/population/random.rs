//! Random Gaussian-arm populations for property tests and stress checks.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Law, LinearArm, PopulationSpec};
use crate::model::{CoefConstraint, ModelSpec};

/// Largest condition number of a generated covariance.
pub const MAX_CONDITION: f64 = 1e3;

/// Σ = Q diag(λ) Qᵀ with Q a random rotation and λ log-uniform on
/// [MAX_CONDITION^(−1/2), MAX_CONDITION^(1/2)]; slopes and
/// intercepts uniform on [−2, 2]; noise sd uniform on [0.1, 2].
pub fn random_law<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Law {
    let g: DMatrix<f64> = DMatrix::from_fn(p, p, |_, _| StandardNormal.sample(rng));
    let q = g.qr().q();
    let half = 0.5 * MAX_CONDITION.log10();
    let lambda: Vec<f64> = (0..p).map(|_| 10f64.powf(rng.random_range(-half..half))).collect();
    let sigma: DMatrix<f64> = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambda)) * q.transpose();
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    let arm = |rng: &mut R| LinearArm {
        intercept: rng.random_range(-2.0..2.0),
        slope: (0..p).map(|_| rng.random_range(-2.0..2.0)).collect(),
        noise_sd: rng.random_range(0.1..2.0),
    };
    let treated = arm(rng);
    let control = arm(rng);
    Law::GaussianArms {
        x_mean: (0..p).map(|_| rng.random_range(-2.0..2.0)).collect(),
        sigma: (0..p).map(|i| (0..p).map(|j| sigma[(i, j)]).collect()).collect(),
        treated,
        control,
    }
}

/// A random moment-mode population with π uniform on [0.05, 0.95].
pub fn random_population<R: Rng + ?Sized>(p: usize, rng: &mut R) -> PopulationSpec {
    let pi = rng.random_range(0.05..0.95);
    let law = random_law(p, rng);
    let moments = law.exact_moments();
    PopulationSpec::new(pi, moments, None).expect("generated population is valid")
}

/// Which nesting condition a generated pair should satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nesting {
    /// Γ₁ ⊇ Γ₂, Δ₁ ⊇ Δ₂ and 𝒰(Δ₁) ⊇ 𝒰(Γ₁).
    KnownMean,
    /// Γ₁ ⊇ Γ₂ and Δ₁ ⊇ Δ₂ only; valid for known-mean dominance at π = 1/2.
    KnownMeanPiHalf,
    /// Γ₁ ⊇ Γ₂, Δ₁ ⊇ Δ₂ and 𝒰(Γ₁) = 𝒰(Δ₁).
    Centered,
}

const FIXED_VALUES: [f64; 4] = [0.0, 0.5, 1.0, -1.0];

fn fixed<R: Rng + ?Sized>(rng: &mut R) -> CoefConstraint {
    CoefConstraint::Fixed(FIXED_VALUES[rng.random_range(0..FIXED_VALUES.len())])
}

fn restrict<R: Rng + ?Sized>(c: &CoefConstraint, rng: &mut R) -> CoefConstraint {
    match c {
        CoefConstraint::Free if rng.random_bool(0.5) => fixed(rng),
        other => *other,
    }
}

/// A distinct pair (spec1, spec2) of p-covariate specs satisfying `nesting`.
pub fn random_nested_pair<R: Rng + ?Sized>(p: usize, nesting: Nesting, rng: &mut R) -> (ModelSpec, ModelSpec) {
    loop {
        let g_mask: Vec<bool> = (0..p).map(|_| rng.random_bool(0.5)).collect();
        let d_mask: Vec<bool> = match nesting {
            Nesting::Centered => g_mask.clone(),
            Nesting::KnownMean => g_mask.iter().map(|&g| g || rng.random_bool(0.5)).collect(),
            Nesting::KnownMeanPiHalf => (0..p).map(|_| rng.random_bool(0.5)).collect(),
        };
        let mut build = |mask: &[bool]| -> Vec<CoefConstraint> {
            mask.iter().map(|&free| if free { CoefConstraint::Free } else { fixed(rng) }).collect()
        };
        let g1 = build(&g_mask);
        let d1 = build(&d_mask);
        let g2: Vec<_> = g1.iter().map(|c| restrict(c, rng)).collect();
        let d2: Vec<_> = d1.iter().map(|c| restrict(c, rng)).collect();
        let s1 = ModelSpec::with_default_names(g1, d1).expect("valid constraints");
        let s2 = ModelSpec::with_default_names(g2, d2).expect("valid constraints");
        if !s1.same_constraints(&s2) {
            return (s1, s2);
        }
    }
}
