//! Classical leaky echo state network baseline.
//!
//! Shares the windowing, ridge readout and one-step evaluation protocol with
//! the quantum reservoir so the two differ only in the feature map.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::SampleSplit;
use crate::error::{invalid_arg, Error, Result};
use crate::qrc::{fit_ridge, mse, one_step_dataset, window_features, FeatureMatrix, RidgeReadout};
use crate::seeding;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EsnSpec {
    pub n_neurons: usize,
    pub spectral_radius: f64,
    pub input_scaling: f64,
    pub leak_rate: f64,
    /// Fraction of nonzero recurrent weights.
    pub connectivity: f64,
    pub seed: u64,
}

impl Default for EsnSpec {
    fn default() -> Self {
        Self {
            n_neurons: 500,
            spectral_radius: 0.9,
            input_scaling: 0.1,
            leak_rate: 0.3,
            connectivity: 0.1,
            seed: 0,
        }
    }
}

impl EsnSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_neurons == 0 {
            return Err(Error::InvalidSpec("ESN needs at least one neuron".into()));
        }
        if !(self.leak_rate > 0.0 && self.leak_rate <= 1.0) {
            return Err(Error::InvalidSpec(format!("leak rate {} not in (0, 1]", self.leak_rate)));
        }
        if !(self.spectral_radius > 0.0 && self.spectral_radius.is_finite()) {
            return Err(Error::InvalidSpec("spectral radius must be positive".into()));
        }
        if !(self.connectivity > 0.0 && self.connectivity <= 1.0) {
            return Err(Error::InvalidSpec(format!("connectivity {} not in (0, 1]", self.connectivity)));
        }
        if !(self.input_scaling >= 0.0 && self.input_scaling.is_finite()) {
            return Err(Error::InvalidSpec("input scaling must be non-negative".into()));
        }
        Ok(())
    }
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Frozen reservoir weights.
#[derive(Clone, Debug, PartialEq)]
pub struct EsnReservoir {
    w_rec: DMatrix<f64>,
    w_in: DMatrix<f64>,
    leak_rate: f64,
}

const BUILD_ATTEMPTS: u32 = 3;

/// Draws a sparse recurrent matrix (nonzeros uniform on `[−1, 1]`) and a dense
/// input matrix, then rescales the recurrent matrix to the target spectral radius.
pub fn build_esn(spec: &EsnSpec, input_dim: usize) -> Result<EsnReservoir> {
    spec.validate()?;
    if input_dim == 0 {
        return Err(invalid_arg("input dimension must be positive"));
    }
    let n = spec.n_neurons;
    for attempt in 0..BUILD_ATTEMPTS {
        let mut rng = seeding::stream_rng(spec.seed, seeding::ESN_WEIGHTS, attempt);
        let mut w_rec = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if rng.random::<f64>() < spec.connectivity {
                    w_rec[(i, j)] = rng.random_range(-1.0..=1.0);
                }
            }
        }
        let w_in = DMatrix::from_fn(n, input_dim, |_, _| rng.random_range(-1.0..=1.0) * spec.input_scaling);
        let raw = spectral_radius(&w_rec);
        if raw > 0.0 && raw.is_finite() {
            w_rec *= spec.spectral_radius / raw;
            return Ok(EsnReservoir {
                w_rec,
                w_in,
                leak_rate: spec.leak_rate,
            });
        }
    }
    Err(Error::InvalidSpec(format!(
        "recurrent matrix had zero spectral radius after {BUILD_ATTEMPTS} draws"
    )))
}

impl EsnReservoir {
    pub fn n_neurons(&self) -> usize {
        self.w_rec.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_in.ncols()
    }

    pub fn leak_rate(&self) -> f64 {
        self.leak_rate
    }

    pub fn recurrent_weights(&self) -> &DMatrix<f64> {
        &self.w_rec
    }

    pub fn input_weights(&self) -> &DMatrix<f64> {
        &self.w_in
    }

    /// Reservoir states after each input, starting from `initial` (zero when `None`).
    pub fn drive(&self, inputs: &[&[f64]], initial: Option<&DVector<f64>>) -> Result<Vec<DVector<f64>>> {
        let mut x = match initial {
            Some(x) => x.clone(),
            None => DVector::zeros(self.n_neurons()),
        };
        let mut states = Vec::with_capacity(inputs.len());
        for u in inputs {
            x = esn_step(self, &x, u, self.leak_rate)?;
            states.push(x.clone());
        }
        Ok(states)
    }
}

/// `x' = (1 − a) x + a tanh(W_rec x + W_in u)`.
pub fn esn_step(res: &EsnReservoir, state: &DVector<f64>, u: &[f64], leak: f64) -> Result<DVector<f64>> {
    if state.len() != res.n_neurons() || u.len() != res.input_dim() {
        return Err(invalid_arg(format!(
            "ESN step expects state {} and input {}, got {} and {}",
            res.n_neurons(),
            res.input_dim(),
            state.len(),
            u.len()
        )));
    }
    let drive = &res.w_rec * state + &res.w_in * DVector::from_column_slice(u);
    Ok(state * (1.0 - leak) + drive.map(f64::tanh) * leak)
}

fn to_rows(states: &[DVector<f64>]) -> Vec<Vec<f64>> {
    states.iter().map(|s| s.iter().copied().collect()).collect()
}

/// Reservoir states driven along the ground-truth training samples, windowed.
pub fn esn_features(res: &EsnReservoir, split: &SampleSplit, w: usize) -> Result<FeatureMatrix> {
    if split.train.len() <= w {
        return Err(invalid_arg("training sequence must be longer than the window"));
    }
    let inputs: Vec<&[f64]> = split.train.iter().map(|p| p.coords.as_slice()).collect();
    window_features(&to_rows(&res.drive(&inputs, None)?), w)
}

/// A fitted ESN readout together with the reservoir state reached at the end
/// of the training samples.
#[derive(Clone, Debug)]
pub struct EsnModel {
    pub reservoir: EsnReservoir,
    pub readout: RidgeReadout,
    pub window: usize,
    last_state: DVector<f64>,
}

/// Builds the reservoir, drives it along the training samples from the zero
/// state and fits the one-step-ahead readout. Returns the model and train MSE.
pub fn esn_fit(spec: &EsnSpec, split: &SampleSplit, w: usize, alpha: f64) -> Result<(EsnModel, f64)> {
    if split.train.len() <= w {
        return Err(invalid_arg("training sequence must be longer than the window"));
    }
    let reservoir = build_esn(spec, split.dim())?;
    let inputs: Vec<&[f64]> = split.train.iter().map(|p| p.coords.as_slice()).collect();
    let states = reservoir.drive(&inputs, None)?;
    let last_state = states.last().expect("non-empty").clone();
    let (design, targets) = one_step_dataset(&to_rows(&states), &split.train, w)?;
    let readout = fit_ridge(&design, &targets, alpha)?;
    let train_mse = mse(&readout.predict_matrix(&design)?, &targets);
    let model = EsnModel {
        reservoir,
        readout,
        window: w,
        last_state,
    };
    Ok((model, train_mse))
}

impl EsnModel {
    /// Continues driving from the end-of-training state through the test
    /// samples and scores one-step predictions windowed on test samples only.
    pub fn evaluate(&self, split: &SampleSplit) -> Result<f64> {
        if split.test.len() <= self.window {
            return Err(invalid_arg("test sequence must be longer than the window"));
        }
        let inputs: Vec<&[f64]> = split.test.iter().map(|p| p.coords.as_slice()).collect();
        let states = self.reservoir.drive(&inputs, Some(&self.last_state))?;
        let (design, targets) = one_step_dataset(&to_rows(&states), &split.test, self.window)?;
        Ok(mse(&self.readout.predict_matrix(&design)?, &targets))
    }
}

/// One-step-ahead train and test MSE with the same protocol as the quantum reservoir.
pub fn esn_fit_evaluate(spec: &EsnSpec, split: &SampleSplit, w: usize, alpha: f64) -> Result<(f64, f64)> {
    let (model, train_mse) = esn_fit(spec, split, w, alpha)?;
    Ok((train_mse, model.evaluate(split)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{make_split, reference_trajectory, SystemSpec};

    fn small(seed: u64) -> EsnSpec {
        EsnSpec {
            n_neurons: 60,
            seed,
            ..EsnSpec::default()
        }
    }

    fn lorenz_split() -> SampleSplit {
        let traj = reference_trajectory(&SystemSpec::lorenz(), 0.01, 4.0).unwrap();
        make_split(&traj, 50, 3.0, 20, 4.0).unwrap()
    }

    #[test]
    fn rescaled_to_target_radius() {
        let res = build_esn(&small(1), 3).unwrap();
        assert!((spectral_radius(res.recurrent_weights()) - 0.9).abs() < 1e-6);
    }

    #[test]
    fn same_seed_same_reservoir() {
        assert_eq!(build_esn(&small(3), 3).unwrap(), build_esn(&small(3), 3).unwrap());
        assert_ne!(build_esn(&small(3), 3).unwrap(), build_esn(&small(4), 3).unwrap());
    }

    #[test]
    fn zero_input_scaling() {
        let spec = EsnSpec {
            input_scaling: 0.0,
            ..small(0)
        };
        let res = build_esn(&spec, 3).unwrap();
        assert!(res.input_weights().iter().all(|&v| v == 0.0));
        let x = DVector::from_element(60, 0.2);
        let a = esn_step(&res, &x, &[1.0, 2.0, 3.0], 0.3).unwrap();
        let b = esn_step(&res, &x, &[-5.0, 0.0, 9.0], 0.3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn step_edge_cases() {
        let res = build_esn(&small(0), 3).unwrap();
        let x = DVector::from_fn(60, |i, _| (i as f64 * 0.37).sin());
        assert_eq!(esn_step(&res, &x, &[1.0, 2.0, 3.0], 0.0).unwrap(), x);
        let zero = DVector::zeros(60);
        assert_eq!(esn_step(&res, &zero, &[0.0; 3], 0.3).unwrap(), zero);
        let next = esn_step(&res, &x, &[10.0, -3.0, 30.0], 0.3).unwrap();
        assert!(next.amax() <= 0.7 * x.amax() + 0.3 + 1e-15);
        assert!(esn_step(&res, &x, &[1.0], 0.3).is_err());
    }

    #[test]
    fn invalid_specs() {
        for bad in [
            EsnSpec { leak_rate: 0.0, ..small(0) },
            EsnSpec { leak_rate: 1.5, ..small(0) },
            EsnSpec { n_neurons: 0, ..small(0) },
            EsnSpec { spectral_radius: -1.0, ..small(0) },
        ] {
            assert!(build_esn(&bad, 3).is_err());
        }
    }

    #[test]
    fn feature_shapes() {
        let split = lorenz_split();
        let res = build_esn(&small(0), 3).unwrap();
        let f5 = esn_features(&res, &split, 5).unwrap();
        assert_eq!((f5.rows(), f5.cols()), (46, 300));
        let f1 = esn_features(&res, &split, 1).unwrap();
        assert_eq!(f1.cols(), 60);
    }

    #[test]
    fn constant_input_reaches_fixed_point() {
        let res = build_esn(&small(2), 3).unwrap();
        let u = [1.0, -2.0, 20.0];
        let inputs: Vec<&[f64]> = vec![&u; 400];
        let states = res.drive(&inputs, None).unwrap();
        let rows = to_rows(&states);
        let m = window_features(&rows, 5).unwrap();
        let last = m.row(m.rows() - 1);
        let earlier = m.row(m.rows() - 50);
        let diff = last.iter().zip(&earlier).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn fitting_leaves_reservoir_untouched() {
        let split = lorenz_split();
        let spec = small(5);
        let before = build_esn(&spec, 3).unwrap();
        let (train, test) = esn_fit_evaluate(&spec, &split, 5, 1.0).unwrap();
        assert!(train.is_finite() && test.is_finite());
        assert_eq!(build_esn(&spec, 3).unwrap(), before);
    }
}
