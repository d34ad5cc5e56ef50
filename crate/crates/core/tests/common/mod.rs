//! Independent reference implementations used to check the library.

#![allow(dead_code)]

use chaosq::qsim::{Circuit, GateOp};
use num_complex::Complex64;
use rand::Rng;

pub type CMat = Vec<Vec<Complex64>>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn identity(dim: usize) -> CMat {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect())
        .collect()
}

fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn rotation(op: &GateOp) -> CMat {
    match *op {
        GateOp::Rx { angle, .. } => {
            let (s, co) = ((angle / 2.0).sin(), (angle / 2.0).cos());
            vec![vec![c(co, 0.0), c(0.0, -s)], vec![c(0.0, -s), c(co, 0.0)]]
        }
        GateOp::Ry { angle, .. } => {
            let (s, co) = ((angle / 2.0).sin(), (angle / 2.0).cos());
            vec![vec![c(co, 0.0), c(-s, 0.0)], vec![c(s, 0.0), c(co, 0.0)]]
        }
        GateOp::Rz { angle, .. } => vec![
            vec![c(0.0, -angle / 2.0).exp(), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, angle / 2.0).exp()],
        ],
        GateOp::Cnot { .. } => unreachable!("not a single-qubit gate"),
    }
}

/// Full `2^n x 2^n` unitary; qubit 0 is the leftmost tensor factor.
pub fn gate_matrix(op: &GateOp, n: usize) -> CMat {
    match *op {
        GateOp::Cnot { control, target } => {
            let p0 = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]];
            let p1 = vec![vec![c(0.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]];
            let x = vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]];
            let mut a = vec![vec![c(1.0, 0.0)]];
            let mut b = vec![vec![c(1.0, 0.0)]];
            for q in 0..n {
                let fa = if q == control { p0.clone() } else { identity(2) };
                let fb = if q == control {
                    p1.clone()
                } else if q == target {
                    x.clone()
                } else {
                    identity(2)
                };
                a = kron(&a, &fa);
                b = kron(&b, &fb);
            }
            a.iter()
                .zip(&b)
                .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect())
                .collect()
        }
        GateOp::Rx { target, .. } | GateOp::Ry { target, .. } | GateOp::Rz { target, .. } => {
            let mut m = vec![vec![c(1.0, 0.0)]];
            for q in 0..n {
                let f = if q == target { rotation(op) } else { identity(2) };
                m = kron(&m, &f);
            }
            m
        }
    }
}

pub fn matvec(m: &CMat, v: &[Complex64]) -> Vec<Complex64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Final state of `circuit` from `|0…0⟩` by explicit matrix products.
pub fn run_dense(circuit: &Circuit) -> Vec<Complex64> {
    let n = circuit.n_qubits;
    let mut v = vec![c(0.0, 0.0); 1 << n];
    v[0] = c(1.0, 0.0);
    for op in &circuit.ops {
        v = matvec(&gate_matrix(op, n), &v);
    }
    v
}

pub fn random_circuit<R: Rng>(rng: &mut R, n: usize, len: usize) -> Circuit {
    let mut circ = Circuit::new(n);
    for _ in 0..len {
        let kind = if n > 1 { rng.random_range(0..4) } else { rng.random_range(0..3) };
        let target = rng.random_range(0..n);
        let angle = rng.random_range(-10.0..10.0);
        match kind {
            0 => circ.rx(target, angle),
            1 => circ.ry(target, angle),
            2 => circ.rz(target, angle),
            _ => {
                let control = (target + rng.random_range(1..n)) % n;
                circ.cnot(control, target)
            }
        };
    }
    circ
}

pub type Mat = Vec<Vec<f64>>;

/// Inverse by Gauss-Jordan elimination with partial pivoting.
pub fn invert(a: &Mat) -> Mat {
    let n = a.len();
    let mut m: Mat = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let d = m[col][col];
        assert!(d.abs() > 1e-300, "singular matrix");
        for v in m[col].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for k in 0..2 * n {
                        m[r][k] -= f * m[col][k];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

fn transpose(a: &Mat) -> Mat {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .map(|r| (0..b[0].len()).map(|j| r.iter().zip(b).map(|(x, row)| x * row[j]).sum()).collect())
        .collect()
}

/// Centred ridge by the explicit normal-equation inverse. Returns
/// `(weights out x p, intercept)`.
pub fn ridge_normal_equations(f: &Mat, s: &Mat, alpha: f64) -> (Mat, Vec<f64>) {
    let n = f.len() as f64;
    let means = |m: &Mat| -> Vec<f64> { (0..m[0].len()).map(|j| m.iter().map(|r| r[j]).sum::<f64>() / n).collect() };
    let (fm, sm) = (means(f), means(s));
    let fc: Mat = f.iter().map(|r| r.iter().zip(&fm).map(|(v, m)| v - m).collect()).collect();
    let sc: Mat = s.iter().map(|r| r.iter().zip(&sm).map(|(v, m)| v - m).collect()).collect();
    let ft = transpose(&fc);
    let mut gram = matmul(&ft, &fc);
    for (i, row) in gram.iter_mut().enumerate() {
        row[i] += alpha;
    }
    let coef = matmul(&matmul(&invert(&gram), &ft), &sc);
    let weights = transpose(&coef);
    let intercept = weights
        .iter()
        .zip(&sm)
        .map(|(w, s0)| s0 - w.iter().zip(&fm).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    (weights, intercept)
}
