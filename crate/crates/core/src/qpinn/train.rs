use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ansatz::{AnsatzSpec, ObservableMap, ParamVector};
use super::loss::{loss_and_gradient, LossComponents, LossProblem, LossWeights};
use crate::dynamics::{SampleSplit, SystemSpec};
use crate::error::{Error, Result};
use crate::seeding;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub lr: f64,
    /// Multiplicative learning-rate decay applied after every step.
    pub decay: f64,
    /// Maximum gradient L2 norm; larger gradients are rescaled.
    pub clip: f64,
    /// Stop after this many consecutive steps without relative improvement > `tolerance`.
    pub patience: usize,
    pub tolerance: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            lr: 0.05,
            decay: 0.99,
            clip: 1.0,
            patience: 30,
            tolerance: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.decay > 0.0 && self.clip > 0.0 && self.tolerance >= 0.0) {
            return Err(Error::InvalidConfig("decay and clip must be positive, tolerance non-negative".into()));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.eps > 0.0) {
            return Err(Error::InvalidConfig("Adam moments must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// One optimisation step as seen before the update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub total: f64,
    pub physics: f64,
    pub boundary: f64,
    pub data: f64,
    /// L2 norm of the raw (unclipped) gradient.
    pub grad_norm: f64,
    pub lr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Completed,
    EarlyStopped,
    NonFinite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
    pub stop_reason: StopReason,
    /// Loss at the returned parameters.
    pub final_loss: Option<LossComponents>,
    pub final_theta: ParamVector,
}

impl TrainTrace {
    pub fn failed(&self) -> bool {
        self.stop_reason == StopReason::NonFinite
    }

    pub fn initial_loss(&self) -> Option<f64> {
        self.records.first().map(|r| r.total)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iter,total,physics,boundary,data,grad_norm,lr")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.iter, r.total, r.physics, r.boundary, r.data, r.grad_norm, r.lr
            )?;
        }
        Ok(())
    }
}

/// Rescales `grad` in place so its L2 norm is at most `threshold`.
/// Returns whether clipping was applied.
pub fn clip_gradient(grad: &mut [f64], threshold: f64) -> bool {
    let norm = l2(grad);
    if norm > threshold {
        let scale = threshold / norm;
        grad.iter_mut().for_each(|g| *g *= scale);
        true
    } else {
        false
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Bias-corrected Adam state.
#[derive(Clone, Debug)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(n: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1,
            beta2,
            eps,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Uniform on `[−π, π]` per coordinate.
pub fn init_params(spec: &AnsatzSpec, seed: u64) -> ParamVector {
    let mut rng = seeding::stream_rng(seed, seeding::QPINN_INIT, 0);
    ParamVector((0..spec.n_params()).map(|_| rng.random_range(-PI..=PI)).collect())
}

/// Trains from a seeded random initialisation with collocation points at the
/// training-sample times and the boundary condition at the first sample.
pub fn train(
    spec: &AnsatzSpec,
    map: &ObservableMap,
    system: &SystemSpec,
    weights: &LossWeights,
    config: &TrainConfig,
    split: &SampleSplit,
) -> Result<(ParamVector, TrainTrace)> {
    let first = split
        .train
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty training split".into()))?;
    let times: Vec<f64> = split.train.iter().map(|p| p.t).collect();
    let data: Vec<Vec<f64>> = split.train.iter().map(|p| p.coords.clone()).collect();
    let problem = LossProblem {
        system,
        weights,
        times: &times,
        u0: &first.coords,
        data: Some(&data),
    };
    train_from(spec, map, &problem, config, init_params(spec, config.seed))
}

/// Adam loop from an explicit starting point.
pub fn train_from(
    spec: &AnsatzSpec,
    map: &ObservableMap,
    problem: &LossProblem<'_>,
    config: &TrainConfig,
    init: ParamVector,
) -> Result<(ParamVector, TrainTrace)> {
    config.validate()?;
    let mut theta = init;
    let mut adam = Adam::new(theta.len(), config.beta1, config.beta2, config.eps);
    let mut lr = config.lr;
    let mut records = Vec::with_capacity(config.iterations);
    let mut best = f64::INFINITY;
    let mut stale = 0usize;
    let mut stop_reason = StopReason::Completed;

    for iter in 0..config.iterations {
        let (loss, mut grad) = match loss_and_gradient(spec, &theta, map, problem, true) {
            Ok(v) => v,
            Err(Error::NumericFailure { .. }) => {
                stop_reason = StopReason::NonFinite;
                break;
            }
            Err(e) => return Err(e),
        };
        let grad_norm = l2(&grad);
        if !grad_norm.is_finite() {
            stop_reason = StopReason::NonFinite;
            break;
        }
        records.push(TraceRecord {
            iter,
            total: loss.total,
            physics: loss.physics,
            boundary: loss.boundary,
            data: loss.data,
            grad_norm,
            lr,
        });

        if loss.total < best * (1.0 - config.tolerance) {
            best = loss.total;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                stop_reason = StopReason::EarlyStopped;
                break;
            }
        }

        clip_gradient(&mut grad, config.clip);
        adam.step(&mut theta.0, &grad, lr);
        lr *= config.decay;
    }

    let final_loss = match loss_and_gradient(spec, &theta, map, problem, false) {
        Ok((c, _)) => Some(c),
        Err(Error::NumericFailure { .. }) => None,
        Err(e) => return Err(e),
    };
    let trace = TrainTrace {
        records,
        stop_reason,
        final_loss,
        final_theta: theta.clone(),
    };
    Ok((theta, trace))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::dynamics::{make_split, reference_trajectory};

    fn small_split(n_train: usize) -> SampleSplit {
        let traj = reference_trajectory(&SystemSpec::lorenz(), 0.01, 4.0).unwrap();
        make_split(&traj, n_train, 3.0, 20, 4.0).unwrap()
    }

    #[test]
    fn single_iteration_moves_theta() {
        let spec = AnsatzSpec::default();
        let config = TrainConfig {
            iterations: 1,
            ..TrainConfig::default()
        };
        let (theta, trace) = train(
            &spec,
            &ObservableMap::lorenz(),
            &SystemSpec::lorenz(),
            &LossWeights::default(),
            &config,
            &small_split(5),
        )
        .unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_ne!(theta, init_params(&spec, 0));
        assert_eq!(trace.stop_reason, StopReason::Completed);
    }

    #[test]
    fn training_is_deterministic() {
        let spec = AnsatzSpec::default();
        let config = TrainConfig {
            iterations: 5,
            seed: 3,
            ..TrainConfig::default()
        };
        let run = || {
            train(
                &spec,
                &ObservableMap::lorenz(),
                &SystemSpec::lorenz(),
                &LossWeights::default(),
                &config,
                &small_split(8),
            )
            .unwrap()
            .1
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn early_stop_freezes_parameters() {
        // A huge relative tolerance means no step ever counts as an improvement.
        let spec = AnsatzSpec::default();
        let config = TrainConfig {
            iterations: 20,
            patience: 3,
            tolerance: 0.99,
            ..TrainConfig::default()
        };
        let (theta, trace) = train(
            &spec,
            &ObservableMap::lorenz(),
            &SystemSpec::lorenz(),
            &LossWeights::default(),
            &config,
            &small_split(5),
        )
        .unwrap();
        assert_eq!(trace.stop_reason, StopReason::EarlyStopped);
        // first record sets `best`, then three stale records
        assert_eq!(trace.records.len(), 4);

        // Replaying the three updates that did happen reproduces theta.
        let replay = TrainConfig {
            iterations: 3,
            patience: usize::MAX,
            ..config
        };
        let (replayed, _) = train(
            &spec,
            &ObservableMap::lorenz(),
            &SystemSpec::lorenz(),
            &LossWeights::default(),
            &replay,
            &small_split(5),
        )
        .unwrap();
        assert_eq!(theta, replayed);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { iterations: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { lr: 0.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn trace_csv_header() {
        let trace = TrainTrace {
            records: vec![TraceRecord {
                iter: 0,
                total: 1.0,
                physics: 0.5,
                boundary: 0.05,
                data: 0.0,
                grad_norm: 3.0,
                lr: 0.05,
            }],
            stop_reason: StopReason::Completed,
            final_loss: None,
            final_theta: ParamVector(vec![]),
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,total,physics,boundary,data,grad_norm,lr\n0,"));
    }

    proptest! {
        #[test]
        fn clipping_contract(g in prop::collection::vec(-1e4f64..1e4, 1..50), threshold in 1e-3f64..10.0) {
            let mut clipped = g.clone();
            let applied = clip_gradient(&mut clipped, threshold);
            prop_assert!(l2(&clipped) <= threshold + 1e-12 || !applied);
            if applied {
                let scale = l2(&g) / l2(&clipped);
                for (a, b) in g.iter().zip(&clipped) {
                    prop_assert!((a - b * scale).abs() <= 1e-9 * a.abs().max(1.0));
                }
            } else {
                prop_assert_eq!(clipped, g);
            }
        }
    }
}
