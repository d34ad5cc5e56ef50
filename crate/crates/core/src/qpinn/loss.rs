//! Physics-informed loss and its parameter-shift gradient.
//!
//! `L = Σ_i ‖u̇(t_i) − F(u(t_i))‖² + λ‖u(0) − u₀‖² + μ Σ_i ‖u(t_i) − u*_i‖²`
//! where `u̇` is a finite difference of the model itself.

use std::f64::consts::{FRAC_PI_2, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ansatz::{check_map, output_expectations, AnsatzSpec, ObservableMap, ParamVector};
use crate::dynamics::SystemSpec;
use crate::error::{invalid_arg, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda_boundary: f64,
    pub mu_data: f64,
    /// Finite-difference step in encoding-angle units (time normalised to `[0, 2π]`).
    pub fd_step: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_boundary: 10.0,
            mu_data: 0.0,
            fd_step: 1e-3,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_boundary >= 0.0 && self.mu_data >= 0.0) {
            return Err(Error::InvalidSpec("loss weights must be non-negative".into()));
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return Err(Error::InvalidSpec("finite-difference step must be positive".into()));
        }
        Ok(())
    }
}

/// Unweighted loss terms plus the weighted total.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub total: f64,
    pub physics: f64,
    pub boundary: f64,
    pub data: f64,
}

/// Inputs shared by the loss and its gradient.
#[derive(Clone, Copy, Debug)]
pub struct LossProblem<'a> {
    pub system: &'a SystemSpec,
    pub weights: &'a LossWeights,
    pub times: &'a [f64],
    pub u0: &'a [f64],
    /// Reference states at `times`, used only when `mu_data > 0`.
    pub data: Option<&'a [Vec<f64>]>,
}

/// Stencil of one collocation point, as indices into the evaluation-time list.
struct Stencil {
    center: usize,
    lo: usize,
    hi: usize,
    width: f64,
}

/// Every time the model is evaluated at, and how the loss reads them.
struct Plan {
    times: Vec<f64>,
    stencils: Vec<Stencil>,
    boundary: usize,
}

impl Plan {
    fn new(times: &[f64], t_max: f64, fd_step: f64) -> Result<Self> {
        let h = fd_step * t_max / TAU;
        let mut eval = vec![0.0];
        let mut stencils = Vec::with_capacity(times.len());
        for &t in times {
            if !(t >= 0.0 && t <= t_max) {
                return Err(invalid_arg(format!("collocation time {t} outside [0, {t_max}]")));
            }
            let center = eval.len();
            eval.push(t);
            let (lo, hi, width) = if t - h < 0.0 {
                eval.push(t + h);
                (center, center + 1, h)
            } else if t + h > t_max {
                eval.push(t - h);
                (center + 1, center, h)
            } else {
                eval.push(t - h);
                eval.push(t + h);
                (center + 1, center + 2, 2.0 * h)
            };
            stencils.push(Stencil { center, lo, hi, width });
        }
        Ok(Self {
            times: eval,
            stencils,
            boundary: 0,
        })
    }
}

/// Loss value plus `∂L/∂u` at each planned evaluation time.
fn evaluate_plan(
    plan: &Plan,
    outputs: &[Vec<f64>],
    problem: &LossProblem<'_>,
    want_adjoint: bool,
) -> Result<(LossComponents, Vec<Vec<f64>>)> {
    let dim = problem.system.dim();
    let w = problem.weights;
    let mut adjoint = if want_adjoint {
        vec![vec![0.0; dim]; outputs.len()]
    } else {
        Vec::new()
    };

    let mut physics = 0.0;
    for (i, st) in plan.stencils.iter().enumerate() {
        let u = &outputs[st.center];
        let f = problem.system.rhs(u)?;
        let residual: Vec<f64> = (0..dim)
            .map(|d| (outputs[st.hi][d] - outputs[st.lo][d]) / st.width - f[d])
            .collect();
        let term: f64 = residual.iter().map(|r| r * r).sum();
        if !term.is_finite() {
            return Err(Error::NumericFailure { point: i, t: plan.times[st.center] });
        }
        physics += term;
        if want_adjoint {
            let jac = problem.system.jacobian(u)?;
            for d in 0..dim {
                let g = 2.0 * residual[d] / st.width;
                adjoint[st.hi][d] += g;
                adjoint[st.lo][d] -= g;
                // −2 Jᵀ r
                let jt_r: f64 = (0..dim).map(|e| jac[e * dim + d] * residual[e]).sum();
                adjoint[st.center][d] -= 2.0 * jt_r;
            }
        }
    }

    let u_start = &outputs[plan.boundary];
    let boundary: f64 = u_start.iter().zip(problem.u0).map(|(a, b)| (a - b).powi(2)).sum();
    if want_adjoint {
        for d in 0..dim {
            adjoint[plan.boundary][d] += w.lambda_boundary * 2.0 * (u_start[d] - problem.u0[d]);
        }
    }

    let mut data = 0.0;
    if w.mu_data > 0.0 {
        if let Some(targets) = problem.data {
            for (st, target) in plan.stencils.iter().zip(targets) {
                let u = &outputs[st.center];
                for d in 0..dim {
                    let diff = u[d] - target[d];
                    data += diff * diff;
                    if want_adjoint {
                        adjoint[st.center][d] += w.mu_data * 2.0 * diff;
                    }
                }
            }
        }
    }

    let total = physics + w.lambda_boundary * boundary + w.mu_data * data;
    if !total.is_finite() {
        return Err(Error::NumericFailure { point: 0, t: 0.0 });
    }
    Ok((
        LossComponents {
            total,
            physics,
            boundary,
            data,
        },
        adjoint,
    ))
}

fn check_problem(problem: &LossProblem<'_>, model_dim: usize, t_max: f64) -> Result<()> {
    problem.weights.validate()?;
    if !(t_max > 0.0) {
        return Err(invalid_arg("t_max must be positive"));
    }
    let dim = problem.system.dim();
    if model_dim != dim || problem.u0.len() != dim {
        return Err(invalid_arg(format!(
            "system dimension {dim}, model outputs {model_dim}, u0 has {}",
            problem.u0.len()
        )));
    }
    if let (true, Some(data)) = (problem.weights.mu_data > 0.0, problem.data) {
        if data.len() != problem.times.len() || data.iter().any(|d| d.len() != dim) {
            return Err(invalid_arg("data targets must match collocation times"));
        }
    }
    Ok(())
}

/// Loss of an arbitrary time-to-state model, e.g. an analytic stand-in.
pub fn physics_loss_with<M>(model: M, model_dim: usize, t_max: f64, problem: &LossProblem<'_>) -> Result<LossComponents>
where
    M: Fn(f64) -> Result<Vec<f64>>,
{
    check_problem(problem, model_dim, t_max)?;
    let plan = Plan::new(problem.times, t_max, problem.weights.fd_step)?;
    let outputs = plan.times.iter().map(|&t| model(t)).collect::<Result<Vec<_>>>()?;
    evaluate_plan(&plan, &outputs, problem, false).map(|(c, _)| c)
}

fn expectations_at(spec: &AnsatzSpec, theta: &ParamVector, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    times
        .par_iter()
        .map(|&t| {
            let (circ, _) = spec.circuit(theta, t)?;
            output_expectations(spec, &circ)
        })
        .collect()
}

/// Loss of the variational circuit.
pub fn physics_loss(
    spec: &AnsatzSpec,
    theta: &ParamVector,
    map: &ObservableMap,
    problem: &LossProblem<'_>,
) -> Result<LossComponents> {
    loss_and_gradient(spec, theta, map, problem, false).map(|(c, _)| c)
}

/// Parameter-shift gradient of [`physics_loss`].
pub fn gradient(spec: &AnsatzSpec, theta: &ParamVector, map: &ObservableMap, problem: &LossProblem<'_>) -> Result<Vec<f64>> {
    loss_and_gradient(spec, theta, map, problem, true).map(|(_, g)| g)
}

/// Loss and (when `with_gradient`) `∂L/∂θ`.
///
/// Every parameter drives exactly one `exp(−iθP/2)` rotation, so
/// `∂⟨Z⟩/∂θ_k = (⟨Z⟩(θ_k + π/2) − ⟨Z⟩(θ_k − π/2)) / 2` exactly; this is chained
/// through the affine output map and the loss adjoint.
pub fn loss_and_gradient(
    spec: &AnsatzSpec,
    theta: &ParamVector,
    map: &ObservableMap,
    problem: &LossProblem<'_>,
    with_gradient: bool,
) -> Result<(LossComponents, Vec<f64>)> {
    spec.validate()?;
    check_map(spec, map)?;
    check_problem(problem, map.dim(), spec.t_max)?;
    if theta.len() != spec.n_params() {
        return Err(invalid_arg(format!(
            "ansatz has {} parameters, got {}",
            spec.n_params(),
            theta.len()
        )));
    }
    let plan = Plan::new(problem.times, spec.t_max, problem.weights.fd_step)?;
    let z = expectations_at(spec, theta, &plan.times)?;
    let outputs: Vec<Vec<f64>> = z.iter().map(|e| map.apply(e)).collect();
    let (components, adjoint) = evaluate_plan(&plan, &outputs, problem, with_gradient)?;
    if !with_gradient {
        return Ok((components, Vec::new()));
    }

    let slopes = map.slopes();
    // Weight on ⟨Z_d⟩ at each evaluation time.
    let z_weights: Vec<Vec<f64>> = adjoint
        .iter()
        .map(|a| a.iter().zip(&slopes).map(|(g, s)| g * s).collect())
        .collect();

    // Per-time contributions, summed afterwards in a fixed order.
    let per_time: Vec<Vec<f64>> = plan
        .times
        .par_iter()
        .zip(z_weights.par_iter())
        .map(|(&t, zw)| -> Result<Vec<f64>> {
            let mut grad = vec![0.0; theta.len()];
            if zw.iter().all(|&v| v == 0.0) {
                return Ok(grad);
            }
            let (base, gate_of) = spec.circuit(theta, t)?;
            for (k, &g) in gate_of.iter().enumerate() {
                let mut plus = base.clone();
                plus.ops[g] = base.ops[g].shifted(FRAC_PI_2);
                let mut minus = base.clone();
                minus.ops[g] = base.ops[g].shifted(-FRAC_PI_2);
                let zp = output_expectations(spec, &plus)?;
                let zm = output_expectations(spec, &minus)?;
                grad[k] = zw.iter().zip(zp.iter().zip(&zm)).map(|(w, (p, m))| w * (p - m) / 2.0).sum();
            }
            Ok(grad)
        })
        .collect::<Result<_>>()?;

    let mut grad = vec![0.0; theta.len()];
    for contribution in &per_time {
        for (g, c) in grad.iter_mut().zip(contribution) {
            *g += c;
        }
    }
    Ok((components, grad))
}
