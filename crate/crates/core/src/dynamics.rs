//! Ground-truth trajectories for the Lorenz, Rössler and Lorenz-96 systems.
//!
//! Trajectories are produced by classical fixed-step RK4 so that every sample
//! lies on a uniform `dt` grid; train/test splits snap requested times to that
//! grid instead of interpolating.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};

/// A chaotic system together with its coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemSpec {
    Lorenz { sigma: f64, rho: f64, beta: f64 },
    Rossler { a: f64, b: f64, c: f64 },
    Lorenz96 { forcing: f64, n: usize },
}

impl Default for SystemSpec {
    fn default() -> Self {
        Self::lorenz()
    }
}

impl SystemSpec {
    pub fn lorenz() -> Self {
        Self::Lorenz {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
        }
    }

    pub fn rossler() -> Self {
        Self::Rossler {
            a: 0.2,
            b: 0.2,
            c: 5.7,
        }
    }

    pub fn lorenz96(n: usize, forcing: f64) -> Result<Self> {
        let spec = Self::Lorenz96 { forcing, n };
        spec.validate()?;
        Ok(spec)
    }

    /// Looks a system up by name with default coefficients.
    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "lorenz" => Ok(Self::lorenz()),
            "rossler" | "rössler" => Ok(Self::rossler()),
            "lorenz96" | "lorenz-96" | "l96" => Self::lorenz96(8, 8.0),
            other => Err(invalid_arg(format!("unknown system '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Lorenz { .. } => "lorenz",
            Self::Rossler { .. } => "rossler",
            Self::Lorenz96 { .. } => "lorenz96",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Lorenz { .. } | Self::Rossler { .. } => 3,
            Self::Lorenz96 { n, .. } => *n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = match *self {
            Self::Lorenz { sigma, rho, beta } => [sigma, rho, beta].iter().all(|v| v.is_finite()),
            Self::Rossler { a, b, c } => [a, b, c].iter().all(|v| v.is_finite()),
            Self::Lorenz96 { forcing, n } => {
                if n < 4 {
                    return Err(Error::InvalidSpec(format!(
                        "Lorenz-96 needs at least 4 variables, got {n}"
                    )));
                }
                forcing.is_finite()
            }
        };
        if finite {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("non-finite {} parameters", self.name())))
        }
    }

    /// Initial condition used by the benchmark protocol.
    pub fn default_initial_state(&self) -> Vec<f64> {
        match *self {
            Self::Lorenz { .. } | Self::Rossler { .. } => vec![1.0, 1.0, 1.0],
            Self::Lorenz96 { forcing, n } => {
                let mut x = vec![forcing; n];
                x[0] += 0.01;
                x
            }
        }
    }

    /// Length of the discarded spin-up before `t = 0`.
    pub fn default_transient(&self) -> f64 {
        match self {
            Self::Lorenz96 { .. } => 5.0,
            _ => 0.0,
        }
    }

    /// Time derivative at `x`.
    pub fn rhs(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let mut out = vec![0.0; x.len()];
        self.rhs_into(x, &mut out);
        Ok(out)
    }

    /// Unchecked variant writing into `out`; both slices must have length `dim`.
    pub(crate) fn rhs_into(&self, x: &[f64], out: &mut [f64]) {
        match *self {
            Self::Lorenz { sigma, rho, beta } => {
                out[0] = sigma * (x[1] - x[0]);
                out[1] = x[0] * (rho - x[2]) - x[1];
                out[2] = x[0] * x[1] - beta * x[2];
            }
            Self::Rossler { a, b, c } => {
                out[0] = -x[1] - x[2];
                out[1] = x[0] + a * x[1];
                out[2] = b + x[2] * (x[0] - c);
            }
            Self::Lorenz96 { forcing, n } => {
                for i in 0..n {
                    let ip1 = x[(i + 1) % n];
                    let im1 = x[(i + n - 1) % n];
                    let im2 = x[(i + n - 2) % n];
                    out[i] = (ip1 - im2) * im1 - x[i] + forcing;
                }
            }
        }
    }

    /// Jacobian of the right-hand side, row-major `dim x dim`.
    pub fn jacobian(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let d = x.len();
        let mut j = vec![0.0; d * d];
        match *self {
            Self::Lorenz { sigma, rho, beta } => {
                j.copy_from_slice(&[
                    -sigma,
                    sigma,
                    0.0,
                    rho - x[2],
                    -1.0,
                    -x[0],
                    x[1],
                    x[0],
                    -beta,
                ]);
            }
            Self::Rossler { a, c, .. } => {
                j.copy_from_slice(&[0.0, -1.0, -1.0, 1.0, a, 0.0, x[2], 0.0, x[0] - c]);
            }
            Self::Lorenz96 { n, .. } => {
                for i in 0..n {
                    let ip1 = (i + 1) % n;
                    let im1 = (i + n - 1) % n;
                    let im2 = (i + n - 2) % n;
                    j[i * n + ip1] += x[im1];
                    j[i * n + im2] -= x[im1];
                    j[i * n + im1] += x[ip1] - x[im2];
                    j[i * n + i] -= 1.0;
                }
            }
        }
        Ok(j)
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(invalid_arg(format!(
                "{} state has dimension {}, got {len}",
                self.name(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// A state of a dynamical system at time `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub t: f64,
    pub coords: Vec<f64>,
}

impl PhasePoint {
    pub fn new(t: f64, coords: Vec<f64>) -> Self {
        Self { t, coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// Uniformly sampled trajectory; the final step may be shorter than `dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub points: Vec<PhasePoint>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.t)
    }

    pub fn last(&self) -> Option<&PhasePoint> {
        self.points.last()
    }

    /// Writes `t,x0,x1,...` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let dim = self.points.first().map_or(0, PhasePoint::dim);
        let mut header = String::from("t");
        for d in 0..dim {
            header.push_str(&format!(",x{d}"));
        }
        writeln!(out, "{header}")?;
        for p in &self.points {
            let mut row = format!("{:.16e}", p.t);
            for c in &p.coords {
                row.push_str(&format!(",{c:.16e}"));
            }
            writeln!(out, "{row}")?;
        }
        Ok(())
    }
}

/// Number of grid steps of size `dt` that fit in `span`, treating values
/// within 1e-9 of an integer as exact.
fn whole_steps(span: f64, dt: f64) -> usize {
    let ratio = span / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() < 1e-9 {
        nearest as usize
    } else {
        ratio.floor() as usize
    }
}

fn rk4_step(system: &SystemSpec, x: &[f64], h: f64, scratch: &mut [Vec<f64>; 5], out: &mut [f64]) {
    let [k1, k2, k3, k4, tmp] = scratch;
    system.rhs_into(x, k1);
    for i in 0..x.len() {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    system.rhs_into(tmp, k2);
    for i in 0..x.len() {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    system.rhs_into(tmp, k3);
    for i in 0..x.len() {
        tmp[i] = x[i] + h * k3[i];
    }
    system.rhs_into(tmp, k4);
    for i in 0..x.len() {
        out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Integrates from `t = 0` to `t_end` with classical RK4.
pub fn integrate(system: &SystemSpec, x0: &[f64], dt: f64, t_end: f64) -> Result<Trajectory> {
    system.validate()?;
    system.check_dim(x0.len())?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid_arg(format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(invalid_arg(format!("t_end must be non-negative, got {t_end}")));
    }

    let full = whole_steps(t_end, dt);
    let remainder = t_end - full as f64 * dt;
    let truncated = remainder > 1e-9 * dt;
    let mut points = Vec::with_capacity(full + 1 + usize::from(truncated));
    points.push(PhasePoint::new(0.0, x0.to_vec()));

    let d = x0.len();
    let mut scratch: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; d]);
    let mut state = x0.to_vec();
    let mut next = vec![0.0; d];
    let total = full + usize::from(truncated);
    for step in 1..=total {
        let (h, t) = if step <= full {
            (dt, step as f64 * dt)
        } else {
            (remainder, t_end)
        };
        rk4_step(system, &state, h, &mut scratch, &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { step });
        }
        std::mem::swap(&mut state, &mut next);
        points.push(PhasePoint::new(t, state.clone()));
    }
    Ok(Trajectory { dt, points })
}

/// Protocol trajectory: default initial condition, spin-up transient discarded,
/// then integrated on `[0, t_end]`.
pub fn reference_trajectory(system: &SystemSpec, dt: f64, t_end: f64) -> Result<Trajectory> {
    let mut x0 = system.default_initial_state();
    let transient = system.default_transient();
    if transient > 0.0 {
        let spin_up = integrate(system, &x0, dt, transient)?;
        x0 = spin_up.points.last().expect("non-empty").coords.clone();
    }
    integrate(system, &x0, dt, t_end)
}

/// Train/test samples drawn from a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSplit {
    pub train: Vec<PhasePoint>,
    pub test: Vec<PhasePoint>,
    pub train_interval: (f64, f64),
    pub test_interval: (f64, f64),
}

impl SampleSplit {
    pub fn dim(&self) -> usize {
        self.train.first().map_or(0, PhasePoint::dim)
    }

    /// Coordinates of every train and test sample, in order.
    pub fn all_points(&self) -> impl Iterator<Item = &PhasePoint> {
        self.train.iter().chain(self.test.iter())
    }
}

fn snap(traj: &Trajectory, t: f64) -> &PhasePoint {
    let idx = (t / traj.dt).round() as usize;
    &traj.points[idx.min(traj.points.len() - 1)]
}

/// Samples `n_train` points uniformly on `[0, train_end]` and `n_test` points
/// on `(train_end, test_end]`, each snapped to the nearest grid time.
///
/// The test grid excludes its left endpoint so test samples never repeat the
/// last training sample.
pub fn make_split(
    traj: &Trajectory,
    n_train: usize,
    train_end: f64,
    n_test: usize,
    test_end: f64,
) -> Result<SampleSplit> {
    if n_train == 0 || n_test == 0 {
        return Err(invalid_arg("sample counts must be at least 1"));
    }
    if !(train_end > 0.0 && train_end < test_end) {
        return Err(invalid_arg(format!(
            "need 0 < train_end < test_end, got {train_end} and {test_end}"
        )));
    }
    if traj.is_empty() || test_end > traj.final_time() + 1e-9 * traj.dt {
        return Err(Error::OutOfRange(format!(
            "requested t = {test_end} but trajectory ends at {}",
            traj.final_time()
        )));
    }

    let train = (0..n_train)
        .map(|j| {
            let t = if n_train == 1 {
                0.0
            } else {
                train_end * j as f64 / (n_train - 1) as f64
            };
            snap(traj, t).clone()
        })
        .collect();
    let span = test_end - train_end;
    let test = (0..n_test)
        .map(|j| snap(traj, train_end + span * (j + 1) as f64 / n_test as f64).clone())
        .collect();
    Ok(SampleSplit {
        train,
        test,
        train_interval: (0.0, train_end),
        test_interval: (train_end, test_end),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn lorenz_rhs_at_ones() {
        let d = SystemSpec::lorenz().rhs(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(d[0], 0.0);
        assert_eq!(d[1], 26.0);
        assert!((d[2] - (1.0 - 8.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn rossler_rhs_at_origin() {
        let d = SystemSpec::rossler().rhs(&[0.0; 3]).unwrap();
        assert_eq!(d, vec![0.0, 0.0, 0.2]);
    }

    #[test]
    fn lorenz96_fixed_point() {
        let sys = SystemSpec::lorenz96(8, 8.0).unwrap();
        assert!(sys.rhs(&[8.0; 8]).unwrap().iter().all(|&v| v == 0.0));
        let traj = integrate(&sys, &[8.0; 8], 0.01, 2.0).unwrap();
        assert!(traj.points.iter().all(|p| p.coords == vec![8.0; 8]));
    }

    #[test]
    fn rhs_dimension_mismatch() {
        assert!(matches!(
            SystemSpec::lorenz().rhs(&[1.0, 2.0]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(SystemSpec::lorenz96(3, 8.0).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let systems = [
            (SystemSpec::lorenz(), vec![1.3, -2.0, 20.0]),
            (SystemSpec::rossler(), vec![0.4, -1.1, 0.7]),
            (
                SystemSpec::lorenz96(6, 8.0).unwrap(),
                vec![1.0, -2.0, 3.5, 0.2, 7.0, -4.0],
            ),
        ];
        for (sys, x) in systems {
            let d = x.len();
            let j = sys.jacobian(&x).unwrap();
            let h = 1e-6;
            for col in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[col] += h;
                xm[col] -= h;
                let fp = sys.rhs(&xp).unwrap();
                let fm = sys.rhs(&xm).unwrap();
                for row in 0..d {
                    let fd = (fp[row] - fm[row]) / (2.0 * h);
                    assert!((fd - j[row * d + col]).abs() < 1e-6, "{} [{row},{col}]", sys.name());
                }
            }
        }
    }

    #[test]
    fn zero_horizon_is_single_point() {
        let traj = integrate(&SystemSpec::lorenz(), &[1.0, 2.0, 3.0], 0.01, 0.0).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.points[0].coords, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn grid_is_uniform_and_lands_on_t_end() {
        let traj = integrate(&SystemSpec::lorenz(), &[1.0; 3], 0.01, 4.0).unwrap();
        assert_eq!(traj.len(), 401);
        for (k, p) in traj.points.iter().enumerate() {
            assert!((p.t - k as f64 * 0.01).abs() <= 1e-12 * p.t.max(1.0));
        }
        assert_eq!(traj.points[0].coords, vec![1.0; 3]);

        let ragged = integrate(&SystemSpec::lorenz(), &[1.0; 3], 0.01, 0.025).unwrap();
        assert_eq!(ragged.len(), 4);
        assert_eq!(ragged.final_time(), 0.025);
    }

    #[test]
    fn lorenz_matches_quarter_step_oracle() {
        let sys = SystemSpec::lorenz();
        let coarse = integrate(&sys, &[1.0; 3], 0.01, 4.0).unwrap();
        let fine = integrate(&sys, &[1.0; 3], 0.0025, 4.0).unwrap();
        let err = max_diff(&coarse.last().unwrap().coords, &fine.last().unwrap().coords);
        assert!(err < 1e-2, "max-norm error {err}");
    }

    #[test]
    fn rk4_is_at_least_third_order() {
        let sys = SystemSpec::lorenz();
        let oracle = integrate(&sys, &[1.0; 3], 0.01 / 4.0, 1.0).unwrap();
        let target = &oracle.last().unwrap().coords;
        let e1 = max_diff(&integrate(&sys, &[1.0; 3], 0.01, 1.0).unwrap().last().unwrap().coords, target);
        let e2 = max_diff(&integrate(&sys, &[1.0; 3], 0.005, 1.0).unwrap().last().unwrap().coords, target);
        assert!(e1 / e2 >= 8.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn divergence_is_reported() {
        // dz/dt = xy - beta z explodes with a huge step.
        let err = integrate(&SystemSpec::lorenz(), &[1e3, 1e3, 1e3], 10.0, 1000.0).unwrap_err();
        assert!(matches!(err, Error::IntegrationDiverged { .. }));
    }

    #[test]
    fn integration_is_deterministic() {
        let a = integrate(&SystemSpec::rossler(), &[1.0; 3], 0.01, 3.0).unwrap();
        let b = integrate(&SystemSpec::rossler(), &[1.0; 3], 0.01, 3.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn protocol_split() {
        let traj = integrate(&SystemSpec::lorenz(), &[1.0; 3], 0.01, 4.0).unwrap();
        let split = make_split(&traj, 50, 3.0, 20, 4.0).unwrap();
        assert_eq!(split.train.len(), 50);
        assert_eq!(split.test.len(), 20);
        assert!(split.test.iter().all(|p| p.t > 3.0 && p.t <= 4.0));
        assert!(split.train.iter().all(|p| (0.0..=3.0).contains(&p.t)));
        assert_eq!(split.train[0].t, 0.0);

        let single = make_split(&traj, 1, 3.0, 1, 4.0).unwrap();
        assert_eq!(single.train[0].t, 0.0);
        assert_eq!(single.test[0].t, 4.0);
    }

    #[test]
    fn snapping_uses_nearest_grid_time() {
        let traj = integrate(&SystemSpec::lorenz(), &[1.0; 3], 0.01, 2.0).unwrap();
        assert!((snap(&traj, 1.234).t - 1.23).abs() < 1e-12);
        assert!((snap(&traj, 1.236).t - 1.24).abs() < 1e-12);
    }

    #[test]
    fn split_beyond_trajectory_fails() {
        let traj = integrate(&SystemSpec::lorenz(), &[1.0; 3], 0.01, 3.5).unwrap();
        assert!(matches!(
            make_split(&traj, 50, 3.0, 20, 4.0),
            Err(Error::OutOfRange(_))
        ));
        assert!(make_split(&traj, 0, 3.0, 20, 3.5).is_err());
        assert!(make_split(&traj, 5, 3.0, 2, 2.0).is_err());
    }

    #[test]
    fn csv_has_header_and_round_trips() {
        let traj = integrate(&SystemSpec::lorenz(), &[1.0; 3], 0.01, 0.05).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x0,x1,x2"));
        for (line, p) in lines.zip(&traj.points) {
            let vals: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
            assert_eq!(vals[0], p.t);
            assert_eq!(&vals[1..], p.coords.as_slice());
        }
    }

    #[test]
    fn lorenz96_reference_leaves_fixed_point() {
        let sys = SystemSpec::lorenz96(8, 8.0).unwrap();
        let traj = reference_trajectory(&sys, 0.01, 1.0).unwrap();
        let spread = traj.points[0]
            .coords
            .iter()
            .map(|v| (v - 8.0).abs())
            .fold(0.0, f64::max);
        assert!(spread > 1.0, "still near fixed point after transient: {spread}");
    }
}
