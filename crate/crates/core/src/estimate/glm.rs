use nalgebra::DVector;

use super::{design_and_response, hc_sandwich, Coefficients, FitResult, HcKind};
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::model::{build_design, Dataset, ModelSpec};

pub const GLM_MAX_ITER: usize = 100;
pub const GLM_TOL: f64 = 1e-10;

/// Linear predictors beyond this are treated as divergence.
const ETA_LIMIT: f64 = 700.0;
const COEF_LIMIT: f64 = 1e6;

/// Poisson log-link maximum likelihood by IRLS. Prior weights on `data`, if
/// any, multiply the working weights. `ate_hat` is the raw treatment
/// coefficient, which is a log rate ratio and not the average treatment
/// effect.
pub fn fit_poisson_glm(spec: &ModelSpec, data: &Dataset) -> Result<FitResult> {
    for (i, &y) in data.y().iter().enumerate() {
        if y < 0.0 || y.fract() != 0.0 {
            return Err(Error::InvalidData(format!("Poisson response at row {i} is not a non-negative integer: {y}")));
        }
    }
    let (design, _) = design_and_response(spec, data)?;
    let labels = design.labels(spec.covariates());
    let y = data.y();
    let n = data.n();
    let prior = data.weights().cloned().unwrap_or_else(|| DVector::from_element(n, 1.0));
    let z = &design.z;
    let off = &design.offset;

    let mut mu = y.map(|v| v + 0.5);
    let mut eta = mu.map(f64::ln);
    let mut coef: Option<DVector<f64>> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut bread = None;

    while iterations < GLM_MAX_ITER {
        iterations += 1;
        let w = mu.component_mul(&prior);
        let sw = w.map(f64::sqrt);
        let work = DVector::from_iterator(n, (0..n).map(|i| eta[i] - off[i] + (y[i] - mu[i]) / mu[i]));
        let mut zw = z.clone();
        for (mut row, s) in zw.row_iter_mut().zip(sw.iter()) {
            row *= *s;
        }
        // a design that loses rank only after reweighting means fitted means collapsed to 0
        let ls = match least_squares(&zw, &work.component_mul(&sw), &labels) {
            Err(Error::Singular { .. }) if iterations > 1 => return Err(Error::Separation),
            other => other?,
        };
        if ls.coef.amax() > COEF_LIMIT {
            return Err(Error::Separation);
        }
        eta = z * &ls.coef + off;
        if eta.amax() > ETA_LIMIT {
            return Err(Error::Separation);
        }
        mu = eta.map(f64::exp);
        let step = coef.as_ref().map(|c| (c - &ls.coef).amax());
        coef = Some(ls.coef);
        bread = Some(ls.bread);
        if matches!(step, Some(s) if s < GLM_TOL) {
            converged = true;
            break;
        }
    }
    let coef = coef.expect("at least one IRLS step");
    if !converged {
        return Err(Error::NonConvergence { iterations });
    }
    // zero counts push the fitted mean of a cell towards 0 and the coefficients off to −∞
    if mu.iter().any(|m| *m < 1e-300) || coef.amax() > 0.5 * COEF_LIMIT {
        return Err(Error::Separation);
    }

    // bread (ZᵀWZ)⁻¹ at the final weights, meat from raw score residuals
    let w = mu.component_mul(&prior);
    let mut zw = z.clone();
    for (mut row, s) in zw.row_iter_mut().zip(w.iter()) {
        row *= s.sqrt();
    }
    let bread = least_squares(&zw, &DVector::zeros(n), &labels).map(|l| l.bread).unwrap_or_else(|_| bread.unwrap());
    let score_resid = DVector::from_iterator(n, (0..n).map(|i| prior[i] * (y[i] - mu[i])));
    let vcov = hc_sandwich(z, &bread, &score_resid, HcKind::HC0);

    let columns = build_design(spec, data)?.columns;
    let theta_hat = Coefficients::assemble(spec, &columns, &coef);
    Ok(FitResult {
        spec: spec.clone(),
        ate_hat: theta_hat.beta,
        theta_hat,
        ate_se: vcov[(1, 1)].max(0.0).sqrt(),
        n_used: n,
        converged,
        vcov,
        columns,
        centered_variance: None,
        iterations,
    })
}
