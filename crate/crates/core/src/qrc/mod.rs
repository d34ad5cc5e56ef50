//! Fixed-reservoir quantum pipeline: angle encoding, frozen random circuit,
//! bitstring-probability features, temporal windowing and a ridge readout.
//!
//! The task is one-step-ahead teacher forcing: a window of `w` ground-truth
//! samples ending at index `t` predicts sample `t + 1`.

mod encoding;
mod features;
mod model;
mod reservoir;
mod ridge;

use nalgebra::DMatrix;
use rayon::prelude::*;

pub use encoding::EncodingSpec;
pub use features::{extract_features, window_features, FeatureMatrix, ShotMode};
pub use model::{QrcModel, MODEL_FORMAT_VERSION};
pub use reservoir::ReservoirSpec;
pub use ridge::{fit_ridge, fit_ridge_no_intercept, RidgeReadout};

use crate::dynamics::{PhasePoint, SampleSplit};
use crate::error::{invalid_arg, Result};
use crate::seeding;

/// Features for a time-ordered run of samples. Sample `i` draws shot noise
/// from stream `(stage, i)` of `seed`.
pub fn feature_sequence(
    spec: &ReservoirSpec,
    enc: &EncodingSpec,
    points: &[PhasePoint],
    mode: ShotMode,
    seed: u64,
    stage: u32,
) -> Result<Vec<Vec<f64>>> {
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = seeding::stream_rng(seed, stage, i as u32);
            extract_features(spec, enc, &p.coords, mode, &mut rng)
        })
        .collect()
}

/// Windowed design matrix and next-step targets. Row `r` holds the window
/// ending at sample `r + w − 1` and targets sample `r + w`.
pub fn one_step_dataset(
    features: &[Vec<f64>],
    points: &[PhasePoint],
    w: usize,
) -> Result<(FeatureMatrix, DMatrix<f64>)> {
    if features.len() != points.len() {
        return Err(invalid_arg("features and points differ in length"));
    }
    if w == 0 || points.len() <= w {
        return Err(invalid_arg(format!(
            "window {w} needs more than {w} samples, got {}",
            points.len()
        )));
    }
    let windows = window_features(features, w)?.into_matrix();
    let rows = points.len() - w;
    let design = windows.rows(0, rows).into_owned();
    let dim = points[0].dim();
    let targets = DMatrix::from_fn(rows, dim, |r, d| points[r + w].coords[d]);
    Ok((FeatureMatrix::from_matrix(design), targets))
}

/// Mean over every entry of the squared difference.
pub fn mse(pred: &DMatrix<f64>, target: &DMatrix<f64>) -> f64 {
    (pred - target).norm_squared() / (target.nrows() * target.ncols()) as f64
}

/// Fits the readout on the training samples; returns it with the in-sample MSE.
pub fn qrc_fit(
    split: &SampleSplit,
    spec: &ReservoirSpec,
    enc: &EncodingSpec,
    w: usize,
    mode: ShotMode,
    alpha: f64,
    seed: u64,
) -> Result<(RidgeReadout, f64)> {
    if split.train.len() <= w {
        return Err(invalid_arg(format!(
            "{} training samples cannot support window {w}",
            split.train.len()
        )));
    }
    let feats = feature_sequence(spec, enc, &split.train, mode, seed, seeding::TRAIN_SHOTS)?;
    let (design, targets) = one_step_dataset(&feats, &split.train, w)?;
    let readout = fit_ridge(&design, &targets, alpha)?;
    let train_mse = mse(&readout.predict_matrix(&design)?, &targets);
    Ok((readout, train_mse))
}

/// Teacher-forced one-step MSE over the test samples.
pub fn qrc_evaluate(
    readout: &RidgeReadout,
    split: &SampleSplit,
    spec: &ReservoirSpec,
    enc: &EncodingSpec,
    w: usize,
    mode: ShotMode,
    seed: u64,
) -> Result<f64> {
    if split.test.len() <= w {
        return Err(invalid_arg(format!(
            "{} test samples cannot support window {w}",
            split.test.len()
        )));
    }
    let feats = feature_sequence(spec, enc, &split.test, mode, seed, seeding::TEST_SHOTS)?;
    let (design, targets) = one_step_dataset(&feats, &split.test, w)?;
    Ok(mse(&readout.predict_matrix(&design)?, &targets))
}
