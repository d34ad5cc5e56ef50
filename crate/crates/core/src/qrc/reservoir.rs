use std::f64::consts::TAU;

use rand::Rng;

use super::encoding::EncodingSpec;
use crate::error::Result;
use crate::qsim::Circuit;
use crate::seeding;

/// Frozen random reservoir circuit.
///
/// Each layer applies `RX RY RZ` on every qubit, a CNOT ring
/// `q_i → q_{(i+1) mod n}` and one RZ coupling rotation per qubit. All angles
/// are drawn once from the seed; there are no mutators.
#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirSpec {
    n_qubits: usize,
    n_layers: usize,
    seed: u64,
    angles: Vec<[f64; 3]>,
    ring_rz_angles: Vec<f64>,
}

impl ReservoirSpec {
    pub fn build(n_qubits: usize, n_layers: usize, seed: u64) -> Self {
        let mut rng = seeding::stream_rng(seed, seeding::RESERVOIR, 0);
        let mut angles = Vec::with_capacity(n_layers * n_qubits);
        let mut ring_rz_angles = Vec::with_capacity(n_layers * n_qubits);
        for _ in 0..n_layers {
            for _ in 0..n_qubits {
                angles.push([
                    rng.random_range(0.0..TAU),
                    rng.random_range(0.0..TAU),
                    rng.random_range(0.0..TAU),
                ]);
            }
            for _ in 0..n_qubits {
                ring_rz_angles.push(rng.random_range(0.0..TAU));
            }
        }
        Self {
            n_qubits,
            n_layers,
            seed,
            angles,
            ring_rz_angles,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Rotation angles indexed `[layer * n_qubits + qubit]` as `[rx, ry, rz]`.
    pub fn angles(&self) -> &[[f64; 3]] {
        &self.angles
    }

    pub fn ring_rz_angles(&self) -> &[f64] {
        &self.ring_rz_angles
    }

    pub fn feature_dim(&self) -> usize {
        1 << self.n_qubits
    }

    /// Encoding rotations for `coords` followed by the frozen layers.
    pub fn circuit(&self, enc: &EncodingSpec, coords: &[f64]) -> Result<Circuit> {
        enc.check_fits(self.n_qubits)?;
        let thetas = enc.encode(coords)?;
        let n = self.n_qubits;
        let mut circ = Circuit::new(n);
        for (&q, &theta) in enc.assignment.iter().zip(&thetas) {
            circ.ry(q, theta);
        }
        for layer in 0..self.n_layers {
            for q in 0..n {
                let [rx, ry, rz] = self.angles[layer * n + q];
                circ.rx(q, rx).ry(q, ry).rz(q, rz);
            }
            if n > 1 {
                for q in 0..n {
                    circ.cnot(q, (q + 1) % n);
                }
            }
            for q in 0..n {
                circ.rz(q, self.ring_rz_angles[layer * n + q]);
            }
        }
        Ok(circ)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::GateOp;

    #[test]
    fn seed_determines_spec() {
        assert_eq!(ReservoirSpec::build(5, 2, 42), ReservoirSpec::build(5, 2, 42));
        assert_ne!(ReservoirSpec::build(5, 2, 42), ReservoirSpec::build(5, 2, 43));
    }

    #[test]
    fn angle_counts() {
        let spec = ReservoirSpec::build(5, 2, 0);
        assert_eq!(spec.angles().len() * 3, 30);
        assert_eq!(spec.ring_rz_angles().len(), 10);
        let all = spec.angles().iter().flatten().chain(spec.ring_rz_angles());
        assert!(all.copied().all(|a| (0.0..TAU).contains(&a)));
    }

    #[test]
    fn circuit_structure() {
        let spec = ReservoirSpec::build(5, 2, 0);
        let enc = EncodingSpec::lorenz(5).unwrap();
        let circ = spec.circuit(&enc, &[0.0, 0.0, 25.0]).unwrap();
        assert_eq!(circ.len(), 3 + 2 * (15 + 5 + 5));
        let ring: Vec<_> = circ
            .ops
            .iter()
            .filter_map(|op| match op {
                GateOp::Cnot { control, target } => Some((*control, *target)),
                _ => None,
            })
            .take(5)
            .collect();
        assert_eq!(ring, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
    }

    #[test]
    fn zero_layers_is_encoding_only() {
        let spec = ReservoirSpec::build(5, 0, 0);
        let enc = EncodingSpec::lorenz(5).unwrap();
        let circ = spec.circuit(&enc, &[-20.0, -30.0, 0.0]).unwrap();
        assert_eq!(circ.len(), 3);
        assert!(circ
            .ops
            .iter()
            .all(|op| matches!(op, GateOp::Ry { angle, .. } if *angle == 0.0)));
    }

    #[test]
    fn encoding_must_fit_register() {
        let spec = ReservoirSpec::build(2, 1, 0);
        let enc = EncodingSpec::lorenz(5).unwrap();
        assert!(spec.circuit(&enc, &[0.0, 0.0, 0.0]).is_err());
    }
}
