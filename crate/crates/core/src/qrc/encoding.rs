use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::dynamics::{PhasePoint, SystemSpec};
use crate::error::{Error, Result};

/// Affine angle encoding of each state variable onto an RY rotation.
///
/// Variable `d` maps to `2π (s_d − lo_d) / (hi_d − lo_d)` after clamping to
/// `[lo_d, hi_d]`, and is applied on qubit `assignment[d]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingSpec {
    pub ranges: Vec<(f64, f64)>,
    pub assignment: Vec<usize>,
}

impl EncodingSpec {
    /// Explicit ranges, variable `d` on qubit `d mod n_qubits`.
    pub fn new(ranges: Vec<(f64, f64)>, n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidSpec("encoding needs at least one qubit".into()));
        }
        let assignment = (0..ranges.len()).map(|d| d % n_qubits).collect();
        let spec = Self { ranges, assignment };
        spec.validate()?;
        Ok(spec)
    }

    /// Fixed Lorenz ranges `x ∈ [−20, 20]`, `y ∈ [−30, 30]`, `z ∈ [0, 50]`.
    pub fn lorenz(n_qubits: usize) -> Result<Self> {
        Self::new(vec![(-20.0, 20.0), (-30.0, 30.0), (0.0, 50.0)], n_qubits)
    }

    /// Per-variable min/max of `points`, widened by `margin` of the span on each side.
    pub fn from_points<'a>(
        points: impl IntoIterator<Item = &'a PhasePoint>,
        margin: f64,
        n_qubits: usize,
    ) -> Result<Self> {
        let mut ranges: Vec<(f64, f64)> = Vec::new();
        for p in points {
            if ranges.is_empty() {
                ranges = p.coords.iter().map(|&c| (c, c)).collect();
            }
            if p.coords.len() != ranges.len() {
                return Err(Error::InvalidArgument("points of mixed dimension".into()));
            }
            for (r, &c) in ranges.iter_mut().zip(&p.coords) {
                r.0 = r.0.min(c);
                r.1 = r.1.max(c);
            }
        }
        if ranges.is_empty() {
            return Err(Error::InvalidArgument("no points to derive encoding ranges".into()));
        }
        for r in &mut ranges {
            let pad = margin * (r.1 - r.0);
            // Constant variables still need a non-degenerate range.
            let pad = if pad > 0.0 { pad } else { 1.0 };
            *r = (r.0 - pad, r.1 + pad);
        }
        Self::new(ranges, n_qubits)
    }

    /// Encoding used by the benchmark protocol: fixed ranges for Lorenz,
    /// train-split ranges with a 10% margin otherwise.
    pub fn for_system<'a>(
        system: &SystemSpec,
        train: impl IntoIterator<Item = &'a PhasePoint>,
        n_qubits: usize,
    ) -> Result<Self> {
        match system {
            SystemSpec::Lorenz { .. } => Self::lorenz(n_qubits),
            _ => Self::from_points(train, 0.1, n_qubits),
        }
    }

    pub fn dim(&self) -> usize {
        self.ranges.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.ranges.len() != self.assignment.len() {
            return Err(Error::InvalidSpec("ranges and assignment differ in length".into()));
        }
        for (d, &(lo, hi)) in self.ranges.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::InvalidSpec(format!(
                    "variable {d} has degenerate range [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    /// Qubits the encoding touches must fit in an `n_qubits` register.
    pub fn check_fits(&self, n_qubits: usize) -> Result<()> {
        match self.assignment.iter().find(|&&q| q >= n_qubits) {
            Some(q) => Err(Error::InvalidSpec(format!(
                "encoding targets qubit {q} but register has {n_qubits}"
            ))),
            None => Ok(()),
        }
    }

    pub fn encode(&self, coords: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        if coords.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "state has dimension {}, encoding expects {}",
                coords.len(),
                self.dim()
            )));
        }
        Ok(coords
            .iter()
            .zip(&self.ranges)
            .map(|(&s, &(lo, hi))| TAU * (s.clamp(lo, hi) - lo) / (hi - lo))
            .collect())
    }
}
