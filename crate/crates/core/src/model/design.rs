use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Centering, CoefConstraint, Dataset, ModelSpec};
use crate::error::{Error, Result};

/// Which model coefficient a design column carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coef {
    Intercept,
    Treatment,
    Main(usize),
    Interaction(usize),
}

impl Coef {
    pub fn label(&self, covariates: &[String]) -> String {
        match *self {
            Coef::Intercept => "1".into(),
            Coef::Treatment => "A".into(),
            Coef::Main(j) => covariates[j].clone(),
            Coef::Interaction(j) => format!("A:{}", covariates[j]),
        }
    }
}

/// Free-column design with the fixed part moved into an offset.
#[derive(Debug, Clone)]
pub struct Design {
    /// n × q, columns `[1, A, X_j (j ∈ 𝒰(Γ)), A·X_j (j ∈ 𝒰(Δ))]`.
    pub z: DMatrix<f64>,
    /// Σ_{j∉𝒰(Γ)} γⱼXᵢⱼ + Aᵢ Σ_{j∉𝒰(Δ)} δⱼXᵢⱼ on the centred covariates.
    pub offset: DVector<f64>,
    pub columns: Vec<Coef>,
    /// The vector subtracted from every covariate row.
    pub center: DVector<f64>,
}

impl Design {
    pub fn q(&self) -> usize {
        self.columns.len()
    }

    pub fn labels(&self, covariates: &[String]) -> Vec<String> {
        self.columns.iter().map(|c| c.label(covariates)).collect()
    }
}

pub fn build_design(spec: &ModelSpec, data: &Dataset) -> Result<Design> {
    let (n, p) = (data.n(), data.p());
    if p != spec.p() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} covariates, data has {}",
            spec.p(),
            p
        )));
    }
    let center = match spec.centering() {
        Centering::KnownMean(mu) => DVector::from_column_slice(mu),
        Centering::Empirical => data.x_mean(),
    };

    let ug = spec.unrestricted_gamma();
    let ud = spec.unrestricted_delta();
    let mut columns = vec![Coef::Intercept, Coef::Treatment];
    columns.extend(ug.iter().map(|&j| Coef::Main(j)));
    columns.extend(ud.iter().map(|&j| Coef::Interaction(j)));

    let a = data.a();
    let x = data.x();
    let mut z = DMatrix::zeros(n, columns.len());
    let mut offset = DVector::zeros(n);
    for i in 0..n {
        let ai = f64::from(a[i]);
        for (k, col) in columns.iter().enumerate() {
            z[(i, k)] = match *col {
                Coef::Intercept => 1.0,
                Coef::Treatment => ai,
                Coef::Main(j) => x[(i, j)] - center[j],
                Coef::Interaction(j) => ai * (x[(i, j)] - center[j]),
            };
        }
        let mut off = 0.0;
        for j in 0..p {
            let xc = x[(i, j)] - center[j];
            if let CoefConstraint::Fixed(g) = spec.gamma()[j] {
                off += g * xc;
            }
            if let CoefConstraint::Fixed(d) = spec.delta()[j] {
                off += ai * d * xc;
            }
        }
        offset[i] = off;
    }
    Ok(Design { z, offset, columns, center })
}
