use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::dynamics::PhasePoint;
use crate::error::{invalid_arg, Error, Result};
use crate::qsim::{self, Circuit, GateOp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Where a trainable angle sits. `layer == n_layers` is the output-refinement layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSlot {
    pub layer: usize,
    pub qubit: usize,
    pub axis: Axis,
}

/// Variational ansatz shape.
///
/// Layout: `n_layers` layers of `RX RY RZ` on every qubit followed by a CNOT
/// chain `q0 → q1 → … → q_{n−1}`, then one refinement layer of `RX RY RZ`
/// on the output qubits. With 4 qubits, 3 layers and 3 outputs this is
/// `36 + 9 = 45` parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub output_qubits: Vec<usize>,
    /// Time that maps to an encoding angle of 2π.
    pub t_max: f64,
}

impl Default for AnsatzSpec {
    fn default() -> Self {
        Self {
            n_qubits: 4,
            n_layers: 3,
            output_qubits: vec![0, 1, 2],
            t_max: 4.0,
        }
    }
}

impl AnsatzSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 {
            return Err(Error::InvalidSpec("ansatz needs at least one qubit".into()));
        }
        if let Some(q) = self.output_qubits.iter().find(|&&q| q >= self.n_qubits) {
            return Err(Error::InvalidSpec(format!("output qubit {q} out of range")));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidSpec(format!("t_max must be positive, got {}", self.t_max)));
        }
        Ok(())
    }

    pub fn param_layout(&self) -> Vec<ParamSlot> {
        let axes = [Axis::X, Axis::Y, Axis::Z];
        let mut layout = Vec::with_capacity(self.n_params());
        for layer in 0..self.n_layers {
            for qubit in 0..self.n_qubits {
                layout.extend(axes.iter().map(|&axis| ParamSlot { layer, qubit, axis }));
            }
        }
        for &qubit in &self.output_qubits {
            layout.extend(axes.iter().map(|&axis| ParamSlot {
                layer: self.n_layers,
                qubit,
                axis,
            }));
        }
        layout
    }

    pub fn n_params(&self) -> usize {
        3 * (self.n_layers * self.n_qubits + self.output_qubits.len())
    }

    /// Full circuit at time `t`. Returns it with, for each parameter, the index
    /// of the gate it controls.
    pub fn circuit(&self, theta: &ParamVector, t: f64) -> Result<(Circuit, Vec<usize>)> {
        self.validate()?;
        if theta.len() != self.n_params() {
            return Err(invalid_arg(format!(
                "ansatz has {} parameters, got {}",
                self.n_params(),
                theta.len()
            )));
        }
        let angle_t = encode_time(t, self.t_max)?;
        let mut circ = Circuit::new(self.n_qubits);
        let encoders = [
            GateOp::Ry { target: 0, angle: angle_t },
            GateOp::Rz { target: 1, angle: angle_t },
            GateOp::Rx { target: 2, angle: angle_t },
        ];
        for op in encoders.into_iter().take(self.n_qubits) {
            circ.push(op);
        }

        let mut gate_of = Vec::with_capacity(theta.len());
        for (slot, &angle) in self.param_layout().iter().zip(theta.as_slice()) {
            gate_of.push(circ.len());
            let target = slot.qubit;
            circ.push(match slot.axis {
                Axis::X => GateOp::Rx { target, angle },
                Axis::Y => GateOp::Ry { target, angle },
                Axis::Z => GateOp::Rz { target, angle },
            });
            let closes_layer = slot.layer < self.n_layers && slot.qubit + 1 == self.n_qubits && slot.axis == Axis::Z;
            if closes_layer {
                for q in 0..self.n_qubits.saturating_sub(1) {
                    circ.cnot(q, q + 1);
                }
            }
        }
        Ok((circ, gate_of))
    }
}

/// Trainable angles, in `param_layout` order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Affine map from `⟨Z⟩ ∈ [−1, 1]` on each output qubit to `[lo_d, hi_d]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableMap {
    pub ranges: Vec<(f64, f64)>,
}

impl ObservableMap {
    pub fn new(ranges: Vec<(f64, f64)>) -> Result<Self> {
        if let Some((lo, hi)) = ranges.iter().find(|(lo, hi)| !(hi > lo)) {
            return Err(Error::InvalidSpec(format!("degenerate output range [{lo}, {hi}]")));
        }
        Ok(Self { ranges })
    }

    /// `[−20, 20] × [−30, 30] × [0, 50]`.
    pub fn lorenz() -> Self {
        Self {
            ranges: vec![(-20.0, 20.0), (-30.0, 30.0), (0.0, 50.0)],
        }
    }

    pub fn dim(&self) -> usize {
        self.ranges.len()
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.ranges)
            .map(|(&e, &(lo, hi))| (e + 1.0) / 2.0 * (hi - lo) + lo)
            .collect()
    }

    /// `∂s_d / ∂⟨Z_d⟩`.
    pub fn slopes(&self) -> Vec<f64> {
        self.ranges.iter().map(|(lo, hi)| (hi - lo) / 2.0).collect()
    }
}

/// `θ_t = 2π t / t_max`.
pub fn encode_time(t: f64, t_max: f64) -> Result<f64> {
    if !(t_max > 0.0) {
        return Err(invalid_arg(format!("t_max must be positive, got {t_max}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid_arg(format!("time must be non-negative, got {t}")));
    }
    Ok(TAU * t / t_max)
}

pub(crate) fn check_map(spec: &AnsatzSpec, map: &ObservableMap) -> Result<()> {
    if map.dim() != spec.output_qubits.len() {
        return Err(invalid_arg(format!(
            "{} output ranges for {} output qubits",
            map.dim(),
            spec.output_qubits.len()
        )));
    }
    Ok(())
}

/// `⟨Z⟩` on each output qubit of an already-built circuit.
pub(crate) fn output_expectations(spec: &AnsatzSpec, circ: &Circuit) -> Result<Vec<f64>> {
    let state = qsim::run(circ, None)?;
    spec.output_qubits.iter().map(|&q| state.expect_z(q)).collect()
}

/// Model state at time `t` from exact expectations.
pub fn qpinn_forward(spec: &AnsatzSpec, theta: &ParamVector, map: &ObservableMap, t: f64) -> Result<PhasePoint> {
    check_map(spec, map)?;
    let (circ, _) = spec.circuit(theta, t)?;
    let z = output_expectations(spec, &circ)?;
    Ok(PhasePoint::new(t, map.apply(&z)))
}

/// Mean squared error of the model against ground-truth samples, averaged
/// over points and components.
pub fn qpinn_mse(spec: &AnsatzSpec, theta: &ParamVector, map: &ObservableMap, points: &[PhasePoint]) -> Result<f64> {
    if points.is_empty() {
        return Err(invalid_arg("no points to score"));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for p in points {
        let pred = qpinn_forward(spec, theta, map, p.t)?;
        if pred.dim() != p.dim() {
            return Err(invalid_arg("model and target dimensions differ"));
        }
        total += pred.coords.iter().zip(&p.coords).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        count += p.dim();
    }
    Ok(total / count as f64)
}
