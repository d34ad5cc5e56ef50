//! Closed-form ridge regression readout shared by the quantum and classical reservoirs.

use nalgebra::{DMatrix, DVector};

use super::features::FeatureMatrix;
use crate::error::{invalid_arg, Error, Result};

/// Linear map `ŝ = W f + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgeReadout {
    /// `out_dim x feature_dim`.
    pub weights: DMatrix<f64>,
    pub intercept: DVector<f64>,
    pub alpha: f64,
}

impl RidgeReadout {
    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn predict(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.feature_dim() {
            return Err(invalid_arg(format!(
                "readout expects {} features, got {}",
                self.feature_dim(),
                features.len()
            )));
        }
        let f = DVector::from_column_slice(features);
        Ok((&self.weights * f + &self.intercept).iter().copied().collect())
    }

    /// One prediction row per feature row.
    pub fn predict_matrix(&self, features: &FeatureMatrix) -> Result<DMatrix<f64>> {
        if features.cols() != self.feature_dim() {
            return Err(invalid_arg(format!(
                "readout expects {} features, got {}",
                self.feature_dim(),
                features.cols()
            )));
        }
        let mut out = features.matrix() * self.weights.transpose();
        for mut row in out.row_iter_mut() {
            row += self.intercept.transpose();
        }
        Ok(out)
    }
}

/// Ridge fit with intercept: solves `(FᵀF + αI) W = FᵀS` on column-centred
/// `F` and `S`, then recovers `b` from the column means so that only slopes
/// are penalised.
pub fn fit_ridge(features: &FeatureMatrix, targets: &DMatrix<f64>, alpha: f64) -> Result<RidgeReadout> {
    fit(features.matrix(), targets, alpha, true)
}

/// Ridge fit through the origin (`b = 0`), no centring.
pub fn fit_ridge_no_intercept(
    features: &FeatureMatrix,
    targets: &DMatrix<f64>,
    alpha: f64,
) -> Result<RidgeReadout> {
    fit(features.matrix(), targets, alpha, false)
}

fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.mean()))
}

fn center(m: &DMatrix<f64>, means: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (mut col, mean) in out.column_iter_mut().zip(means.iter()) {
        col.add_scalar_mut(-mean);
    }
    out
}

fn fit(f: &DMatrix<f64>, s: &DMatrix<f64>, alpha: f64, intercept: bool) -> Result<RidgeReadout> {
    let (n, p) = f.shape();
    if n == 0 || n != s.nrows() {
        return Err(invalid_arg(format!(
            "feature rows ({n}) and target rows ({}) must match and be nonzero",
            s.nrows()
        )));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(invalid_arg(format!("alpha must be finite and non-negative, got {alpha}")));
    }

    let (f_mean, s_mean) = if intercept {
        (column_means(f), column_means(s))
    } else {
        (DVector::zeros(p), DVector::zeros(s.ncols()))
    };
    let fc = if intercept { center(f, &f_mean) } else { f.clone() };
    let sc = if intercept { center(s, &s_mean) } else { s.clone() };

    // coef is p x out with S ≈ F coef.
    let coef = if alpha == 0.0 {
        least_squares(&fc, &sc)?
    } else if p <= n {
        let mut gram = fc.tr_mul(&fc);
        for i in 0..p {
            gram[(i, i)] += alpha;
        }
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::Singular("regularised normal matrix is not positive definite".into()))?;
        chol.solve(&fc.tr_mul(&sc))
    } else {
        // Wide design: (FᵀF + αI)⁻¹Fᵀ = Fᵀ(FFᵀ + αI)⁻¹, an n x n solve instead of p x p.
        let mut kernel = &fc * fc.transpose();
        for i in 0..n {
            kernel[(i, i)] += alpha;
        }
        let chol = kernel
            .cholesky()
            .ok_or_else(|| Error::Singular("regularised kernel matrix is not positive definite".into()))?;
        fc.tr_mul(&chol.solve(&sc))
    };

    let weights = coef.transpose();
    let intercept = &s_mean - &weights * &f_mean;
    if weights.iter().chain(intercept.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Singular("ridge solution is not finite".into()));
    }
    Ok(RidgeReadout {
        weights,
        intercept,
        alpha,
    })
}

/// Unregularised least squares; requires full column rank.
fn least_squares(f: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, p) = f.shape();
    if p > n {
        return Err(Error::Singular(format!(
            "alpha = 0 with {p} features and only {n} samples"
        )));
    }
    let svd = f.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let tol = n.max(p) as f64 * f64::EPSILON * sigma_max;
    if sigma_max == 0.0 || svd.singular_values.iter().any(|&sv| sv <= tol) {
        return Err(Error::Singular("feature matrix is rank deficient and alpha = 0".into()));
    }
    svd.solve(s, tol).map_err(|e| Error::Singular(e.to_string()))
}
