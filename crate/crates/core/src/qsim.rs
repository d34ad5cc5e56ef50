//! Dense statevector simulator.
//!
//! Conventions:
//! - `RX(θ) = exp(-iθX/2)`, `RY(θ) = exp(-iθY/2)`, `RZ(θ) = exp(-iθZ/2)`.
//! - Qubit 0 is the most significant bit of a basis-state index, so for
//!   `n = 3` the index `0b100` is `|100⟩` (qubit 0 set).

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GateOp {
    Rx { target: usize, angle: f64 },
    Ry { target: usize, angle: f64 },
    Rz { target: usize, angle: f64 },
    Cnot { control: usize, target: usize },
}

impl GateOp {
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        match *self {
            GateOp::Rx { target, angle } | GateOp::Ry { target, angle } | GateOp::Rz { target, angle } => {
                if target >= n_qubits {
                    return Err(invalid_arg(format!("qubit {target} out of range for {n_qubits} qubits")));
                }
                if !angle.is_finite() {
                    return Err(invalid_arg("rotation angle must be finite"));
                }
            }
            GateOp::Cnot { control, target } => {
                if control >= n_qubits || target >= n_qubits {
                    return Err(invalid_arg(format!(
                        "CNOT({control}->{target}) out of range for {n_qubits} qubits"
                    )));
                }
                if control == target {
                    return Err(invalid_arg("CNOT control and target must differ"));
                }
            }
        }
        Ok(())
    }

    /// Returns a copy with the rotation angle shifted by `delta`; CNOT is unchanged.
    pub fn shifted(self, delta: f64) -> Self {
        match self {
            GateOp::Rx { target, angle } => GateOp::Rx { target, angle: angle + delta },
            GateOp::Ry { target, angle } => GateOp::Ry { target, angle: angle + delta },
            GateOp::Rz { target, angle } => GateOp::Rz { target, angle: angle + delta },
            cnot => cnot,
        }
    }
}

/// An ordered gate list on a fixed register width.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n_qubits: usize,
    pub ops: Vec<GateOp>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            ops: Vec::new(),
        }
    }

    pub fn push(&mut self, op: GateOp) -> &mut Self {
        self.ops.push(op);
        self
    }

    pub fn rx(&mut self, target: usize, angle: f64) -> &mut Self {
        self.push(GateOp::Rx { target, angle })
    }

    pub fn ry(&mut self, target: usize, angle: f64) -> &mut Self {
        self.push(GateOp::Ry { target, angle })
    }

    pub fn rz(&mut self, target: usize, angle: f64) -> &mut Self {
        self.push(GateOp::Rz { target, angle })
    }

    pub fn cnot(&mut self, control: usize, target: usize) -> &mut Self {
        self.push(GateOp::Cnot { control, target })
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        self.ops.iter().try_for_each(|op| op.validate(self.n_qubits))
    }
}

/// Pure state of `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct QubitState {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl QubitState {
    /// `|0...0⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > 24 {
            return Err(invalid_arg(format!("unsupported register width {n_qubits}")));
        }
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(invalid_arg(format!("basis index {index} out of range")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wraps raw amplitudes; the vector must have length `2^n` and unit norm.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(invalid_arg(format!("amplitude length {len} is not 2^n")));
        }
        let state = Self {
            n_qubits: len.trailing_zeros() as usize,
            amps,
        };
        if (state.norm_sqr() - 1.0).abs() > 1e-10 {
            return Err(invalid_arg("amplitudes are not normalized"));
        }
        Ok(state)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Mask selecting `qubit`'s bit in a basis index.
    fn mask(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    /// Applies `op` to a copy of the state.
    pub fn apply(&self, op: &GateOp) -> Result<Self> {
        let mut out = self.clone();
        out.apply_mut(op)?;
        Ok(out)
    }

    pub fn apply_mut(&mut self, op: &GateOp) -> Result<()> {
        op.validate(self.n_qubits)?;
        self.apply_unchecked(op);
        Ok(())
    }

    fn apply_unchecked(&mut self, op: &GateOp) {
        match *op {
            GateOp::Rx { target, angle } => {
                let (s, c) = (angle / 2.0).sin_cos();
                let m = [
                    Complex64::new(c, 0.0),
                    Complex64::new(0.0, -s),
                    Complex64::new(0.0, -s),
                    Complex64::new(c, 0.0),
                ];
                self.apply_single(target, m);
            }
            GateOp::Ry { target, angle } => {
                let (s, c) = (angle / 2.0).sin_cos();
                let m = [
                    Complex64::new(c, 0.0),
                    Complex64::new(-s, 0.0),
                    Complex64::new(s, 0.0),
                    Complex64::new(c, 0.0),
                ];
                self.apply_single(target, m);
            }
            GateOp::Rz { target, angle } => {
                let mask = self.mask(target);
                let lo = Complex64::from_polar(1.0, -angle / 2.0);
                let hi = Complex64::from_polar(1.0, angle / 2.0);
                for (i, a) in self.amps.iter_mut().enumerate() {
                    *a *= if i & mask == 0 { lo } else { hi };
                }
            }
            GateOp::Cnot { control, target } => {
                let cm = self.mask(control);
                let tm = self.mask(target);
                for i in 0..self.amps.len() {
                    if i & cm != 0 && i & tm == 0 {
                        self.amps.swap(i, i | tm);
                    }
                }
            }
        }
    }

    /// `m` is row-major `[m00, m01, m10, m11]`.
    fn apply_single(&mut self, target: usize, m: [Complex64; 4]) {
        let mask = self.mask(target);
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let a0 = self.amps[i];
                let a1 = self.amps[i | mask];
                self.amps[i] = m[0] * a0 + m[1] * a1;
                self.amps[i | mask] = m[2] * a0 + m[3] * a1;
            }
        }
    }

    /// Measurement distribution over basis indices.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨Z⟩` on `qubit`.
    pub fn expect_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(invalid_arg(format!("qubit {qubit} out of range")));
        }
        let mask = self.mask(qubit);
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| if i & mask == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum())
    }
}

/// Runs `circuit` from `initial`, or from `|0...0⟩` when `None`.
pub fn run(circuit: &Circuit, initial: Option<&QubitState>) -> Result<QubitState> {
    circuit.validate()?;
    let mut state = match initial {
        Some(s) if s.n_qubits != circuit.n_qubits => {
            return Err(invalid_arg(format!(
                "circuit has {} qubits but state has {}",
                circuit.n_qubits, s.n_qubits
            )))
        }
        Some(s) => s.clone(),
        None => QubitState::zero(circuit.n_qubits)?,
    };
    for op in &circuit.ops {
        state.apply_unchecked(op);
    }
    Ok(state)
}

/// Sampled measurement outcomes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotResult {
    pub counts: BTreeMap<usize, u64>,
    pub shots: u64,
}

impl ShotResult {
    /// Empirical frequencies as a dense vector of length `dim`.
    pub fn frequencies(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (&i, &c) in &self.counts {
            out[i] = c as f64 / self.shots as f64;
        }
        out
    }
}

/// Multinomial draw of `shots` outcomes from `probs`, seeded.
pub fn sample_shots(probs: &[f64], shots: u64, rng_seed: u64) -> Result<ShotResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    sample_shots_with(probs, shots, &mut rng)
}

/// Multinomial draw using a caller-supplied generator (sequential conditional binomials).
pub fn sample_shots_with<R: rand::Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Result<ShotResult> {
    if shots == 0 {
        return Err(invalid_arg("shots must be at least 1"));
    }
    if let Some(p) = probs.iter().find(|&&p| p < -1e-12 || !p.is_finite()) {
        return Err(invalid_arg(format!("invalid probability {p}")));
    }
    let total: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(invalid_arg(format!("probabilities sum to {total}")));
    }

    let mut counts = BTreeMap::new();
    let mut remaining = shots;
    let mut mass = total;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let p = p.max(0.0);
        let k = if i + 1 == probs.len() || p >= mass {
            remaining
        } else if p <= 0.0 {
            0
        } else {
            Binomial::new(remaining, (p / mass).clamp(0.0, 1.0))
                .expect("probability clamped to [0, 1]")
                .sample(rng)
        };
        if k > 0 {
            counts.insert(i, k);
        }
        remaining -= k;
        mass -= p;
    }
    Ok(ShotResult { counts, shots })
}
