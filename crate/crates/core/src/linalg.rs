//! Small dense solves used by the estimators and the population calculus.
//!
//! Designs here are tall and thin (q ≤ 2 + 2p columns), so every solve goes
//! through a Householder QR of the design followed by an SVD of the q×q
//! triangular factor. The singular values of R are those of the design,
//! which gives the rank check without ever forming ZᵀZ. Symmetric moment
//! matrices are factored by Cholesky after an eigenvalue rank check.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value floor below which a design is declared singular.
pub const DESIGN_RANK_TOL: f64 = 1e-10;

/// Same floor for eigenvalues of symmetric moment matrices (they scale like
/// squared singular values).
pub const GRAM_RANK_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coef: DVector<f64>,
    /// (ZᵀZ)⁻¹
    pub bread: DMatrix<f64>,
}

/// Ordinary least squares of `y` on `z`, failing loudly on rank deficiency.
pub fn least_squares(z: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<LeastSquares> {
    let (n, q) = z.shape();
    if n < q {
        return Err(Error::DimensionMismatch(format!(
            "{n} rows cannot identify {q} coefficients"
        )));
    }
    let qr = z.clone().qr();
    let r = qr.r();
    check_rank(&r, DESIGN_RANK_TOL, names)?;

    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let qty = qty.rows(0, q).into_owned();
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular { columns: names.to_vec() })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(q, q))
        .ok_or_else(|| Error::Singular { columns: names.to_vec() })?;
    let bread = &r_inv * r_inv.transpose();
    Ok(LeastSquares { coef, bread })
}

/// Solves `g x = h` for a symmetric positive definite `g`.
pub fn solve_gram(g: &DMatrix<f64>, h: &DVector<f64>, names: &[String]) -> Result<DVector<f64>> {
    Ok(cholesky_checked(g, names)?.solve(h))
}

/// Inverse of a symmetric positive definite matrix with a rank check.
pub fn inverse_gram(g: &DMatrix<f64>, names: &[String]) -> Result<DMatrix<f64>> {
    Ok(cholesky_checked(g, names)?.inverse())
}

// Rank check on the symmetric eigenvalues, then a Cholesky factor for the
// solve. nalgebra's SVD can return singular vectors accurate only to ~1e-5
// on well-conditioned symmetric inputs, so it is not used for solving.
fn cholesky_checked(g: &DMatrix<f64>, names: &[String]) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("moment matrix"));
    }
    let sym = (g + g.transpose()) * 0.5;
    if sym.nrows() > 0 {
        let eig = sym.clone().symmetric_eigen();
        let (max, min, argmin) = extremes(&eig.eigenvalues);
        if !(max > 0.0) || min < GRAM_RANK_TOL * max {
            return Err(Error::Singular { columns: heavy_entries(eig.eigenvectors.column(argmin).iter(), names) });
        }
    }
    sym.cholesky().ok_or_else(|| Error::Singular { columns: names.to_vec() })
}

fn check_rank(r: &DMatrix<f64>, tol: f64, names: &[String]) -> Result<()> {
    if r.ncols() == 0 {
        return Ok(());
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design"));
    }
    let svd = r.clone().svd(false, true);
    let (max, min, _) = extremes(&svd.singular_values);
    if !(max > 0.0) || min < tol * max {
        return Err(Error::Singular { columns: offending(&svd, names) });
    }
    Ok(())
}

fn extremes(sv: &DVector<f64>) -> (f64, f64, usize) {
    let mut max = 0.0_f64;
    let mut min = f64::INFINITY;
    let mut argmin = 0;
    for (i, &s) in sv.iter().enumerate() {
        max = max.max(s);
        if s < min {
            min = s;
            argmin = i;
        }
    }
    (max, min, argmin)
}

// Columns carrying weight in the right singular vector of the smallest
// singular value.
fn offending(svd: &nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>, names: &[String]) -> Vec<String> {
    let Some(v_t) = svd.v_t.as_ref() else {
        return names.to_vec();
    };
    let (_, _, argmin) = extremes(&svd.singular_values);
    heavy_entries(v_t.row(argmin).iter(), names)
}

fn heavy_entries<'a>(v: impl Iterator<Item = &'a f64> + Clone, names: &[String]) -> Vec<String> {
    let peak = v.clone().fold(0.0_f64, |m, x| m.max(x.abs()));
    v.enumerate()
        .filter(|(_, v)| v.abs() >= 0.1 * peak)
        .map(|(j, _)| names.get(j).cloned().unwrap_or_else(|| format!("#{j}")))
        .collect()
}

/// xᵀ M y
pub fn quad(x: &DVector<f64>, m: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    (x.transpose() * m * y)[(0, 0)]
}
