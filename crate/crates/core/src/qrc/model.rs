use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{
    feature_sequence, one_step_dataset, qrc_evaluate, qrc_fit, EncodingSpec, ReservoirSpec, RidgeReadout, ShotMode,
};
use crate::dynamics::{PhasePoint, SampleSplit};
use crate::error::{invalid_arg, Error, Result};
use crate::seeding;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A trained QRC predictor. The reservoir is stored as its seed and shape and
/// rebuilt on load.
#[derive(Clone, Debug, PartialEq)]
pub struct QrcModel {
    pub reservoir: ReservoirSpec,
    pub encoding: EncodingSpec,
    pub window: usize,
    pub shots: ShotMode,
    pub readout: RidgeReadout,
}

#[derive(Serialize, Deserialize)]
struct StoredModel {
    format_version: u32,
    reservoir_seed: u64,
    n_qubits: usize,
    n_layers: usize,
    encoding: EncodingSpec,
    window: usize,
    shots: ShotMode,
    alpha: f64,
    out_dim: usize,
    feature_dim: usize,
    /// Row-major `out_dim x feature_dim`.
    weights: Vec<f64>,
    intercept: Vec<f64>,
}

impl QrcModel {
    /// Fits a readout and returns the model with its train MSE.
    pub fn fit(
        split: &SampleSplit,
        reservoir: ReservoirSpec,
        encoding: EncodingSpec,
        window: usize,
        shots: ShotMode,
        alpha: f64,
        seed: u64,
    ) -> Result<(Self, f64)> {
        let (readout, train_mse) = qrc_fit(split, &reservoir, &encoding, window, shots, alpha, seed)?;
        let model = Self {
            reservoir,
            encoding,
            window,
            shots,
            readout,
        };
        Ok((model, train_mse))
    }

    pub fn evaluate(&self, split: &SampleSplit, seed: u64) -> Result<f64> {
        qrc_evaluate(
            &self.readout,
            split,
            &self.reservoir,
            &self.encoding,
            self.window,
            self.shots,
            seed,
        )
    }

    /// Next-state predictions for every full window in `points`; row `r`
    /// predicts `points[r + window]`.
    pub fn predict(&self, points: &[PhasePoint], seed: u64) -> Result<DMatrix<f64>> {
        if points.len() <= self.window {
            return Err(invalid_arg("not enough samples to form a window"));
        }
        let feats = feature_sequence(
            &self.reservoir,
            &self.encoding,
            points,
            self.shots,
            seed,
            seeding::TEST_SHOTS,
        )?;
        let (design, _) = one_step_dataset(&feats, points, self.window)?;
        self.readout.predict_matrix(&design)
    }

    pub fn to_writer<W: Write>(&self, out: W) -> Result<()> {
        let w = &self.readout.weights;
        let stored = StoredModel {
            format_version: MODEL_FORMAT_VERSION,
            reservoir_seed: self.reservoir.seed(),
            n_qubits: self.reservoir.n_qubits(),
            n_layers: self.reservoir.n_layers(),
            encoding: self.encoding.clone(),
            window: self.window,
            shots: self.shots,
            alpha: self.readout.alpha,
            out_dim: w.nrows(),
            feature_dim: w.ncols(),
            weights: w.transpose().iter().copied().collect(),
            intercept: self.readout.intercept.iter().copied().collect(),
        };
        serde_json::to_writer_pretty(out, &stored)?;
        Ok(())
    }

    pub fn from_reader<R: Read>(input: R) -> Result<Self> {
        let stored: StoredModel = serde_json::from_reader(input)?;
        if stored.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::FormatVersion(stored.format_version));
        }
        if stored.weights.len() != stored.out_dim * stored.feature_dim || stored.intercept.len() != stored.out_dim {
            return Err(invalid_arg("stored readout has inconsistent shape"));
        }
        stored.encoding.validate()?;
        Ok(Self {
            reservoir: ReservoirSpec::build(stored.n_qubits, stored.n_layers, stored.reservoir_seed),
            encoding: stored.encoding,
            window: stored.window,
            shots: stored.shots,
            readout: RidgeReadout {
                weights: DMatrix::from_row_slice(stored.out_dim, stored.feature_dim, &stored.weights),
                intercept: DVector::from_vec(stored.intercept),
                alpha: stored.alpha,
            },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.to_writer(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(BufReader::new(File::open(path)?))
    }
}
