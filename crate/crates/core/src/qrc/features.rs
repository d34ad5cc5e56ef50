use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoding::EncodingSpec;
use super::reservoir::ReservoirSpec;
use crate::error::{invalid_arg, Result};
use crate::qsim;

/// How measurement probabilities are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotMode {
    /// Exact `|amp|²` from the statevector.
    Exact,
    /// Empirical frequencies from this many shots.
    Shots(u64),
}

impl ShotMode {
    pub fn from_flags(shots: u64, exact: bool) -> Self {
        if exact {
            Self::Exact
        } else {
            Self::Shots(shots)
        }
    }
}

/// Bitstring probability vector (length `2^n`) of the reservoir output for one state.
pub fn extract_features<R: Rng + ?Sized>(
    spec: &ReservoirSpec,
    enc: &EncodingSpec,
    coords: &[f64],
    mode: ShotMode,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let state = qsim::run(&spec.circuit(enc, coords)?, None)?;
    let probs = state.probabilities();
    match mode {
        ShotMode::Exact => Ok(probs),
        ShotMode::Shots(shots) => Ok(qsim::sample_shots_with(&probs, shots, rng)?.frequencies(probs.len())),
    }
}

/// Row-per-sample feature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix(DMatrix<f64>);

impl FeatureMatrix {
    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(invalid_arg("ragged feature rows"));
        }
        Ok(Self(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

/// Concatenates `w` consecutive feature vectors: row `r` is
/// `[f_r, f_{r+1}, …, f_{r+w−1}]`, i.e. the window ending at time `r + w − 1`.
pub fn window_features(features: &[Vec<f64>], w: usize) -> Result<FeatureMatrix> {
    if w == 0 {
        return Err(invalid_arg("window must be at least 1"));
    }
    if features.len() < w {
        return Err(invalid_arg(format!(
            "window {w} needs at least {w} feature vectors, got {}",
            features.len()
        )));
    }
    let dim = features[0].len();
    if features.iter().any(|f| f.len() != dim) {
        return Err(invalid_arg("feature vectors differ in length"));
    }
    let rows = features.len() - w + 1;
    Ok(FeatureMatrix(DMatrix::from_fn(rows, w * dim, |r, c| {
        features[r + c / dim][c % dim]
    })))
}
