use nalgebra::{DMatrix, DVector};

use super::{
    design_and_response, hc_sandwich, is_empirical, CenteredVariance, Coefficients, FitOptions, FitResult, HcKind,
};
use crate::error::{Error, Result};
use crate::linalg::{least_squares, quad};
use crate::model::{Dataset, ModelSpec};

/// Constrained OLS (unweighted; any weights on `data` are ignored).
pub fn fit_ols(spec: &ModelSpec, data: &Dataset) -> Result<FitResult> {
    fit_ols_with(spec, data, FitOptions::default())
}

pub fn fit_ols_with(spec: &ModelSpec, data: &Dataset, opts: FitOptions) -> Result<FitResult> {
    fit_linear(spec, data, None, opts)
}

/// Weighted constrained least squares, minimising Σ wᵢ εᵢ².
pub fn fit_weighted(spec: &ModelSpec, data: &Dataset) -> Result<FitResult> {
    let w = data
        .weights()
        .ok_or_else(|| Error::InvalidData("weighted fit requested but the dataset has no weights".into()))?;
    fit_linear(spec, data, Some(w), FitOptions::default())
}

fn fit_linear(spec: &ModelSpec, data: &Dataset, weights: Option<&DVector<f64>>, opts: FitOptions) -> Result<FitResult> {
    let (design, target) = design_and_response(spec, data)?;
    let labels = design.labels(spec.covariates());

    let (zw, yw) = match weights {
        Some(w) => {
            let sw = w.map(f64::sqrt);
            let mut zw = design.z.clone();
            for (mut row, s) in zw.row_iter_mut().zip(sw.iter()) {
                row *= *s;
            }
            (zw, target.component_mul(&sw))
        }
        None => (design.z.clone(), target.clone()),
    };
    let ls = least_squares(&zw, &yw, &labels)?;
    let resid_w = &yw - &zw * &ls.coef;
    let vcov = hc_sandwich(&zw, &ls.bread, &resid_w, opts.hc);

    let theta_hat = Coefficients::assemble(spec, &design.columns, &ls.coef);
    let ate_hat = theta_hat.beta;
    let mut fit = FitResult {
        spec: spec.clone(),
        theta_hat,
        ate_hat,
        ate_se: vcov[(1, 1)].max(0.0).sqrt(),
        n_used: data.n(),
        converged: true,
        vcov,
        columns: design.columns,
        centered_variance: None,
        iterations: 1,
    };

    if weights.is_none() && is_empirical(spec) && !spec.has_no_interactions() {
        let full = if spec.is_full() { fit.clone() } else { fit_linear(&spec.full_model(), data, None, opts)? };
        let cv = estimate_ate_variance_centered(spec, data, &full, &fit)?;
        fit.ate_se = (cv.total / data.n() as f64).sqrt();
        fit.centered_variance = Some(cv);
    }
    Ok(fit)
}

/// HC0 sandwich of the free coefficients at `theta_hat`. Uses the dataset's
/// weights when present.
pub fn sandwich_vcov(spec: &ModelSpec, data: &Dataset, theta_hat: &Coefficients) -> Result<DMatrix<f64>> {
    let (design, target) = design_and_response(spec, data)?;
    let labels = design.labels(spec.covariates());
    let coef = theta_hat.free_vector(&design.columns);
    let resid = &target - &design.z * &coef;
    let (zw, rw) = match data.weights() {
        Some(w) => {
            let mut zw = design.z.clone();
            for (mut row, wi) in zw.row_iter_mut().zip(w.iter()) {
                row *= wi.sqrt();
            }
            (zw, resid.component_mul(&w.map(f64::sqrt)))
        }
        None => (design.z, resid),
    };
    // bread only; the response is irrelevant here
    let ls = least_squares(&zw, &DVector::zeros(zw.nrows()), &labels)?;
    Ok(hc_sandwich(&zw, &ls.bread, &rw, HcKind::HC0))
}

/// n·var̂(β̃) = n·var̂(β̂) + δ̂ₛᵀΣ̂(2δ̂_f − δ̂ₛ), clamped at zero.
pub fn estimate_ate_variance_centered(
    spec: &ModelSpec,
    data: &Dataset,
    fit_full: &FitResult,
    fit_sub: &FitResult,
) -> Result<CenteredVariance> {
    if !fit_full.spec.is_full() {
        return Err(Error::InvalidData("fit_full must be the fit of the full interaction model".into()));
    }
    let p = spec.p();
    if data.p() != p || fit_full.theta_hat.delta.len() != p || fit_sub.theta_hat.delta.len() != p {
        return Err(Error::DimensionMismatch("fits and data disagree on p".into()));
    }
    let sigma = data.x_cov();
    let ds = DVector::from_column_slice(&fit_sub.theta_hat.delta);
    let df = DVector::from_column_slice(&fit_full.theta_hat.delta);
    let base = data.n() as f64 * fit_sub.beta_var();
    let correction = quad(&ds, &sigma, &(2.0 * &df - &ds));
    let raw = base + correction;
    Ok(CenteredVariance { base, correction, total: raw.max(0.0), clamped: raw < 0.0 })
}

/// Plug-in of the known-π variance formula, E[(A−π)²ε²] / (π²(1−π)²),
/// evaluated on the fit's (unweighted) residuals. Returns n·var̂(β̂).
pub fn known_pi_variance(fit: &FitResult, data: &Dataset, pi: f64) -> Result<f64> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(Error::InvalidPi(pi));
    }
    let (design, target) = design_and_response(&fit.spec, data)?;
    let coef = fit.theta_hat.free_vector(&design.columns);
    let resid = target - &design.z * coef;
    let n = data.n() as f64;
    let m: f64 = data
        .a()
        .iter()
        .zip(resid.iter())
        .map(|(&a, e)| (f64::from(a) - pi).powi(2) * e * e)
        .sum::<f64>()
        / n;
    Ok(m / (pi * pi * (1.0 - pi) * (1.0 - pi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::FitOptions;
    use crate::model::{named_spec, parse_formula, Centering, CoefConstraint, Estimator};
    use proptest::prelude::*;

    fn hand_data() -> Dataset {
        let x: Vec<Vec<f64>> = [-1.0, 0.0, 1.0, -1.0, 0.0, 1.0].iter().map(|&v| vec![v]).collect();
        Dataset::from_rows(vec![1, 1, 1, 0, 0, 0], &x, vec![1.0, 2.0, 4.0, 0.0, 1.0, 1.0]).unwrap()
    }

    fn known_zero(spec: ModelSpec) -> ModelSpec {
        let p = spec.p();
        spec.with_centering(Centering::KnownMean(vec![0.0; p])).unwrap()
    }

    #[test]
    fn anova_is_difference_in_means() {
        let x: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let data = Dataset::from_rows(vec![1, 1, 0, 0], &x, vec![3.0, 5.0, 1.0, 3.0]).unwrap();
        let fit = fit_ols(&named_spec(Estimator::Anova, 1).unwrap(), &data).unwrap();
        assert!((fit.ate_hat - 2.0).abs() < 1e-12);
    }

    // Exact rational solve of the 4×4 normal equations: θ = (2/3, 5/3, 1/2, 1),
    // HC0 β-entry 1/27 (ANHECOVA), 16/27 (ANOVA), 4/27 (ANCOVA).
    #[test]
    fn hand_dataset_matches_rational_oracle() {
        let data = hand_data();
        let fit = fit_ols(&known_zero(named_spec(Estimator::Anhecova, 1).unwrap()), &data).unwrap();
        let t = &fit.theta_hat;
        assert!((t.alpha - 2.0 / 3.0).abs() < 1e-12);
        assert!((t.beta - 5.0 / 3.0).abs() < 1e-12);
        assert!((t.gamma[0] - 0.5).abs() < 1e-12);
        assert!((t.delta[0] - 1.0).abs() < 1e-12);
        assert!((fit.beta_var() - 1.0 / 27.0).abs() < 1e-12);

        let anova = fit_ols(&named_spec(Estimator::Anova, 1).unwrap(), &data).unwrap();
        assert!((anova.beta_var() - 16.0 / 27.0).abs() < 1e-12);
        let ancova = fit_ols(&named_spec(Estimator::Ancova, 1).unwrap(), &data).unwrap();
        assert!((ancova.beta_var() - 4.0 / 27.0).abs() < 1e-12);
        assert!((ancova.ate_se - (4.0f64 / 27.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn anova_sandwich_is_two_sample_formula() {
        let data = hand_data();
        let fit = fit_ols(&named_spec(Estimator::Anova, 1).unwrap(), &data).unwrap();
        let (n0, n1) = data.arm_counts();
        let mean = |arm: u8| {
            let v: Vec<f64> = data.a().iter().zip(data.y().iter()).filter(|(a, _)| **a == arm).map(|(_, y)| *y).collect();
            (v.iter().sum::<f64>() / v.len() as f64, v)
        };
        let m2 = |arm: u8| {
            let (m, v) = mean(arm);
            v.iter().map(|y| (y - m).powi(2)).sum::<f64>() / v.len() as f64
        };
        let n = data.n() as f64;
        let pi = n1 as f64 / n;
        let expected = (m2(1) / pi + m2(0) / (1.0 - pi)) / n;
        assert_eq!(n0, 3);
        assert!((fit.beta_var() - expected).abs() < 1e-14);
    }

    #[test]
    fn constant_outcome_has_zero_vcov() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![(i as f64).sin()]).collect();
        let data = Dataset::from_rows(vec![0, 1, 0, 1, 0, 1, 0, 1], &x, vec![4.0; 8]).unwrap();
        for e in [Estimator::Anova, Estimator::Ancova, Estimator::Anhecova] {
            let fit = fit_ols(&named_spec(e, 1).unwrap(), &data).unwrap();
            assert!(fit.vcov.abs().max() < 1e-24, "{e}");
            assert!(fit.ate_hat.abs() < 1e-12);
            assert!(fit.ate_se.abs() < 1e-10);
        }
    }

    #[test]
    fn did_is_difference_of_gain_scores() {
        let data = hand_data();
        let spec = named_spec(Estimator::Did, 1).unwrap();
        let fit = fit_ols(&spec, &data).unwrap();
        let gain: Vec<f64> = data.y().iter().zip(data.x().column(0).iter()).map(|(y, x)| y - x).collect();
        let g1 = gain[..3].iter().sum::<f64>() / 3.0;
        let g0 = gain[3..].iter().sum::<f64>() / 3.0;
        assert!((fit.ate_hat - (g1 - g0)).abs() < 1e-10);
        assert_eq!(fit.theta_hat.gamma, vec![1.0]);
        assert_eq!(fit.theta_hat.delta, vec![0.0]);
        let fit_known = fit_ols(&known_zero(spec), &data).unwrap();
        assert!((fit_known.ate_hat - (g1 - g0)).abs() < 1e-10);
    }

    #[test]
    fn empirical_equals_beta_hat_plus_delta_xbar() {
        let data = hand_data().shifted(&[2.0]).unwrap();
        let known = fit_ols(&known_zero(named_spec(Estimator::Anhecova, 1).unwrap()), &data).unwrap();
        assert!((known.ate_hat + 1.0 / 3.0).abs() < 1e-12);
        let emp = fit_ols(&named_spec(Estimator::Anhecova, 1).unwrap(), &data).unwrap();
        let xbar = data.x_mean()[0];
        assert!((emp.ate_hat - (known.ate_hat + known.theta_hat.delta[0] * xbar)).abs() < 1e-12);
        assert!((emp.ate_hat - 5.0 / 3.0).abs() < 1e-12);
        // ANHECOVA: correction is δ̂ᵀΣ̂δ̂ = 1 · 2/3
        let cv = emp.centered_variance.unwrap();
        assert!((cv.correction - 2.0 / 3.0).abs() < 1e-12);
        assert!((cv.base - 6.0 / 27.0).abs() < 1e-12);
        assert!(!cv.clamped);
    }

    #[test]
    fn no_interactions_means_no_correction() {
        let data = hand_data();
        let fit = fit_ols(&named_spec(Estimator::Ancova, 1).unwrap(), &data).unwrap();
        assert!(fit.centered_variance.is_none());
        let full = fit_ols(&named_spec(Estimator::Anhecova, 1).unwrap(), &data).unwrap();
        let cv = estimate_ate_variance_centered(&fit.spec, &data, &full, &fit).unwrap();
        assert_eq!(cv.correction, 0.0);
        assert!((cv.total - data.n() as f64 * fit.beta_var()).abs() < 1e-14);
        assert!(estimate_ate_variance_centered(&fit.spec, &data, &fit, &full).is_err());
    }

    #[test]
    fn unit_and_constant_weights_reproduce_ols() {
        let data = hand_data();
        let spec = named_spec(Estimator::Anhecova, 1).unwrap();
        let ols = fit_ols(&spec, &data).unwrap();
        let unit = fit_weighted(&spec, &data.clone().with_weights(DVector::from_element(6, 1.0)).unwrap()).unwrap();
        let two = fit_weighted(&spec, &data.clone().with_weights(DVector::from_element(6, 2.0)).unwrap()).unwrap();
        assert!((unit.ate_hat - ols.ate_hat).abs() < 1e-12);
        assert!((unit.vcov.clone() - &ols.vcov).abs().max() < 1e-12);
        assert!((two.ate_hat - ols.ate_hat).abs() < 1e-12);
        assert!((two.vcov - unit.vcov).abs().max() < 1e-12);
        assert!(fit_weighted(&spec, &data).is_err());
    }

    #[test]
    fn weighted_fit_minimises_weighted_rss() {
        let data = hand_data().with_weights(DVector::from_vec(vec![1.0, 3.0, 0.5, 2.0, 1.0, 4.0])).unwrap();
        let spec = named_spec(Estimator::Ancova, 1).unwrap();
        let fit = fit_weighted(&spec, &data).unwrap();
        let design = crate::model::build_design(&spec, &data).unwrap();
        let coef = fit.theta_hat.free_vector(&design.columns);
        let resid = data.y() - &design.offset - &design.z * coef;
        let score = design.z.transpose() * resid.component_mul(data.weights().unwrap());
        assert!(score.abs().max() < 1e-12);
    }

    #[test]
    fn errors() {
        let x: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let data = Dataset::from_rows(vec![1, 1, 1, 1], &x, vec![1.0; 4]).unwrap();
        assert_eq!(fit_ols(&named_spec(Estimator::Anova, 1).unwrap(), &data).unwrap_err(), Error::EmptyArm(0));

        // covariate constant within the sample → main effect not identified
        let x: Vec<Vec<f64>> = vec![vec![2.0]; 6];
        let data = Dataset::from_rows(vec![1, 0, 1, 0, 1, 0], &x, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        match fit_ols(&named_spec(Estimator::Ancova, 1).unwrap(), &data) {
            Err(Error::Singular { columns }) => assert!(columns.contains(&"X1".to_string())),
            other => panic!("{other:?}"),
        }
        assert!(known_pi_variance(&fit_ols(&named_spec(Estimator::Anova, 1).unwrap(), &hand_data()).unwrap(), &hand_data(), 1.0).is_err());
    }

    #[test]
    fn sandwich_vcov_matches_fit() {
        let data = hand_data();
        let spec = named_spec(Estimator::Anhecova, 1).unwrap();
        let fit = fit_ols(&spec, &data).unwrap();
        let v = sandwich_vcov(&spec, &data, &fit.theta_hat).unwrap();
        assert!((v - &fit.vcov).abs().max() < 1e-14);
        let hc1 = fit_ols_with(&spec, &data, FitOptions { hc: HcKind::HC1 }).unwrap();
        assert!((hc1.beta_var() - fit.beta_var() * 6.0 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn known_pi_plugin_matches_sandwich_for_anova_at_sample_fraction() {
        let data = hand_data();
        let fit = fit_ols(&named_spec(Estimator::Anova, 1).unwrap(), &data).unwrap();
        let v = known_pi_variance(&fit, &data, 0.5).unwrap();
        assert!((v - data.n() as f64 * fit.beta_var()).abs() < 1e-12);
    }

    #[test]
    fn fit_serialises_expected_fields() {
        let fit = fit_ols(&named_spec(Estimator::Ancova, 1).unwrap(), &hand_data()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fit.to_json()).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(keys, vec!["ate_hat", "ate_se", "converged", "n_used", "spec", "theta_hat"]);
    }

    fn random_data(seed: u64, n: usize, p: usize) -> Dataset {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut a: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
        a[0] = 0;
        a[1] = 1;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0) + 1.0).collect()).collect();
        let y: Vec<f64> = rows
            .iter()
            .zip(&a)
            .map(|(r, &ai)| r.iter().sum::<f64>() * (1.0 + f64::from(ai)) + rng.random_range(-1.0..1.0) * (1.0 + r[0].abs()))
            .collect();
        Dataset::from_rows(a, &rows, y).unwrap()
    }

    fn spec_strategy(p: usize) -> impl Strategy<Value = ModelSpec> {
        let c = prop_oneof![Just(CoefConstraint::Free), Just(CoefConstraint::Fixed(0.0)), Just(CoefConstraint::Fixed(0.7))];
        (proptest::collection::vec(c.clone(), p), proptest::collection::vec(c, p))
            .prop_map(|(g, d)| ModelSpec::with_default_names(g, d).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn residuals_satisfy_normal_equations(seed in 0u64..10_000, spec in spec_strategy(2)) {
            let data = random_data(seed, 40, 2);
            let fit = fit_ols(&spec, &data).unwrap();
            let design = crate::model::build_design(&spec, &data).unwrap();
            let coef = fit.theta_hat.free_vector(&design.columns);
            let resid = data.y() - &design.offset - &design.z * coef;
            let score = design.z.transpose() * &resid;
            let scale = data.y().amax().max(1.0);
            prop_assert!(score.amax() < 1e-8 * data.n() as f64 * scale);
            prop_assert!(fit.ate_se >= 0.0);
            let eig = fit.vcov.clone().symmetric_eigen();
            prop_assert!(eig.eigenvalues.min() > -1e-12 * fit.vcov.amax().max(1e-300));
        }

        #[test]
        fn empirical_fit_is_shift_invariant(seed in 0u64..10_000, spec in spec_strategy(2), c0 in -50.0f64..50.0, c1 in -50.0f64..50.0) {
            let data = random_data(seed, 30, 2);
            let a = fit_ols(&spec, &data).unwrap();
            let b = fit_ols(&spec, &data.shifted(&[c0, c1]).unwrap()).unwrap();
            prop_assert!((a.ate_hat - b.ate_hat).abs() < 1e-9);
            prop_assert!((a.ate_se - b.ate_se).abs() < 1e-9);
        }

        #[test]
        fn rss_is_monotone_under_nesting(seed in 0u64..10_000) {
            let data = random_data(seed, 30, 2);
            let names = crate::model::default_names(2);
            let chain = ["1 + A", "1 + A + X1", "1 + A + X", "1 + A + X + A:X2", "1 + A + X + A:X"];
            let mut prev = f64::INFINITY;
            for f in chain {
                let spec = parse_formula(f, &names).unwrap();
                let fit = fit_ols(&spec, &data).unwrap();
                let design = crate::model::build_design(&spec, &data).unwrap();
                let resid = data.y() - &design.offset - &design.z * fit.theta_hat.free_vector(&design.columns);
                let rss = resid.norm_squared();
                prop_assert!(rss <= prev + 1e-9);
                prev = rss;
            }
        }

        #[test]
        fn no_interaction_centering_modes_agree(seed in 0u64..10_000) {
            let data = random_data(seed, 30, 2);
            let spec = named_spec(Estimator::Ancova, 2).unwrap();
            let emp = fit_ols(&spec, &data).unwrap();
            let xbar = data.x_mean();
            let known = fit_ols(&spec.with_centering(Centering::KnownMean(xbar.iter().copied().collect())).unwrap(), &data).unwrap();
            prop_assert!((emp.ate_hat - known.ate_hat).abs() < 1e-12);
        }
    }
}
