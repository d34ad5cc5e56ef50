use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::SystemSpec;
use crate::error::{Error, Result};
use crate::qpinn::{LossWeights, TrainConfig};
use crate::qrc::ShotMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Qrc,
    Qpinn,
    Esn,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Qrc, Method::Qpinn, Method::Esn];

    pub fn name(self) -> &'static str {
        match self {
            Method::Qrc => "qrc",
            Method::Qpinn => "qpinn",
            Method::Esn => "esn",
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "qrc" => Ok(Method::Qrc),
            "qpinn" => Ok(Method::Qpinn),
            "esn" => Ok(Method::Esn),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A named system with optional coefficient overrides, e.g.
/// `name = "lorenz"` and `params = { rho = 30.0 }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemChoice {
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

impl Default for SystemChoice {
    fn default() -> Self {
        Self::named("lorenz")
    }
}

impl SystemChoice {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.to_string(),
            params: BTreeMap::new(),
        }
    }

    pub fn resolve(&self) -> Result<SystemSpec> {
        let mut spec = SystemSpec::by_name(&self.name).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for (key, &value) in &self.params {
            let slot = match (&mut spec, key.as_str()) {
                (SystemSpec::Lorenz { sigma, .. }, "sigma") => sigma,
                (SystemSpec::Lorenz { rho, .. }, "rho") => rho,
                (SystemSpec::Lorenz { beta, .. }, "beta") => beta,
                (SystemSpec::Rossler { a, .. }, "a") => a,
                (SystemSpec::Rossler { b, .. }, "b") => b,
                (SystemSpec::Rossler { c, .. }, "c") => c,
                (SystemSpec::Lorenz96 { forcing, .. }, "forcing" | "f") => forcing,
                (SystemSpec::Lorenz96 { n, .. }, "n") => {
                    if !(value >= 1.0 && value.fract() == 0.0) {
                        return Err(Error::InvalidConfig(format!("Lorenz-96 n must be a positive integer, got {value}")));
                    }
                    *n = value as usize;
                    continue;
                }
                _ => {
                    return Err(Error::InvalidConfig(format!(
                        "system '{}' has no parameter '{key}'",
                        self.name
                    )))
                }
            };
            *slot = value;
        }
        spec.validate().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(spec)
    }
}

/// Sampling grid shared by every method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Protocol {
    pub dt: f64,
    pub n_train: usize,
    pub train_end: f64,
    pub n_test: usize,
    pub test_end: f64,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            dt: 0.01,
            n_train: 50,
            train_end: 3.0,
            n_test: 20,
            test_end: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QrcParams {
    pub qubits: usize,
    pub layers: usize,
    pub window: usize,
    pub shots: u64,
    pub exact_probs: bool,
    pub alpha: f64,
}

impl Default for QrcParams {
    fn default() -> Self {
        Self {
            qubits: 5,
            layers: 2,
            window: 5,
            shots: 1024,
            exact_probs: false,
            alpha: 1.0,
        }
    }
}

impl QrcParams {
    pub fn shot_mode(&self) -> ShotMode {
        ShotMode::from_flags(self.shots, self.exact_probs)
    }
}

pub const QPINN_DESK_ITERATIONS: usize = 50;
pub const QPINN_FULL_ITERATIONS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QpinnParams {
    pub qubits: usize,
    pub layers: usize,
    pub iterations: usize,
    pub lr: f64,
    pub decay: f64,
    pub clip: f64,
    pub patience: usize,
    pub tolerance: f64,
    pub lambda: f64,
    pub mu: f64,
    pub fd_step: f64,
}

impl Default for QpinnParams {
    fn default() -> Self {
        let train = TrainConfig::default();
        let loss = LossWeights::default();
        Self {
            qubits: 4,
            layers: 3,
            iterations: QPINN_DESK_ITERATIONS,
            lr: train.lr,
            decay: train.decay,
            clip: train.clip,
            patience: train.patience,
            tolerance: train.tolerance,
            lambda: loss.lambda_boundary,
            mu: loss.mu_data,
            fd_step: loss.fd_step,
        }
    }
}

impl QpinnParams {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            iterations: self.iterations,
            lr: self.lr,
            decay: self.decay,
            clip: self.clip,
            patience: self.patience,
            tolerance: self.tolerance,
            seed,
            ..TrainConfig::default()
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            lambda_boundary: self.lambda,
            mu_data: self.mu,
            fd_step: self.fd_step,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EsnParams {
    pub neurons: usize,
    pub spectral_radius: f64,
    pub input_scaling: f64,
    pub leak: f64,
    pub connectivity: f64,
    pub window: usize,
    pub alpha: f64,
}

impl Default for EsnParams {
    fn default() -> Self {
        Self {
            neurons: 500,
            spectral_radius: 0.9,
            input_scaling: 0.1,
            leak: 0.3,
            connectivity: 0.1,
            window: 5,
            alpha: 1.0,
        }
    }
}

/// Seed schedules for the full benchmark: the method comparison on Lorenz and
/// the multi-system QRC sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchPlan {
    pub comparison_seeds: Vec<u64>,
    pub systems_seeds: Vec<u64>,
    pub systems: Vec<String>,
}

impl Default for BenchPlan {
    fn default() -> Self {
        Self {
            comparison_seeds: (0..5).collect(),
            systems_seeds: (0..10).collect(),
            systems: vec!["lorenz".into(), "rossler".into(), "lorenz96".into()],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reports: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
}

/// One experiment: a system, a method, its hyperparameters and a seed list.
///
/// Stored as TOML with top-level `method`, `seeds`, `workers` and sections
/// `[system]`, `[protocol]`, `[qrc]`, `[qpinn]`, `[esn]`, `[bench]`, `[output]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub seeds: Vec<u64>,
    /// Seeds run concurrently on this many threads; 0 picks the core count.
    pub workers: usize,
    pub system: SystemChoice,
    pub protocol: Protocol,
    pub qrc: QrcParams,
    pub qpinn: QpinnParams,
    pub esn: EsnParams,
    pub bench: BenchPlan,
    pub output: OutputPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            method: Method::Qrc,
            seeds: (0..5).collect(),
            workers: 0,
            system: SystemChoice::default(),
            protocol: Protocol::default(),
            qrc: QrcParams::default(),
            qpinn: QpinnParams::default(),
            esn: EsnParams::default(),
            bench: BenchPlan::default(),
            output: OutputPaths::default(),
        }
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| bad(e.to_string()))
    }

    /// Restores the full 200-iteration QPINN budget.
    pub fn with_full_qpinn_budget(mut self) -> Self {
        self.qpinn.iterations = QPINN_FULL_ITERATIONS;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(bad("seed list is empty"));
        }
        let system = self.system.resolve()?;
        let p = &self.protocol;
        if !(p.dt > 0.0 && p.dt.is_finite()) {
            return Err(bad(format!("dt must be positive, got {}", p.dt)));
        }
        if !(0.0 < p.train_end && p.train_end < p.test_end && p.test_end.is_finite()) {
            return Err(bad("protocol needs 0 < train_end < test_end"));
        }
        if p.n_train < 2 || p.n_test < 1 {
            return Err(bad("protocol needs at least 2 train and 1 test samples"));
        }
        match self.method {
            Method::Qrc => {
                let q = &self.qrc;
                if q.qubits == 0 || q.layers == 0 || q.window == 0 {
                    return Err(bad("qrc qubits, layers and window must be positive"));
                }
                if q.qubits > 16 {
                    return Err(bad(format!("{} qubits exceeds the 16-qubit simulator limit", q.qubits)));
                }
                if !q.exact_probs && q.shots == 0 {
                    return Err(bad("qrc shots must be positive unless exact_probs is set"));
                }
                check_window(q.window, p)?;
            }
            Method::Qpinn => {
                let q = &self.qpinn;
                if system.dim() > q.qubits {
                    return Err(bad(format!(
                        "qpinn has {} qubits but {} needs {} outputs",
                        q.qubits,
                        system.name(),
                        system.dim()
                    )));
                }
                if q.layers == 0 {
                    return Err(bad("qpinn layers must be positive"));
                }
                q.train_config(0).validate()?;
                q.loss_weights().validate().map_err(|e| bad(e.to_string()))?;
            }
            Method::Esn => {
                check_window(self.esn.window, p)?;
            }
        }
        Ok(())
    }
}

fn check_window(w: usize, p: &Protocol) -> Result<()> {
    if w == 0 {
        return Err(bad("window must be at least 1"));
    }
    if w >= p.n_test || w >= p.n_train {
        return Err(bad(format!(
            "window {w} leaves no one-step targets with {} train / {} test samples",
            p.n_train, p.n_test
        )));
    }
    Ok(())
}
