//! Variational quantum physics-informed network.
//!
//! Time is angle-encoded into a small parameterised circuit whose Pauli-Z
//! expectations, mapped affinely onto the attractor's bounding box, give the
//! state `u(t)`. Training minimises the ODE residual (finite differences of
//! the circuit in time) plus a boundary term, with exact parameter-shift
//! gradients and Adam.

mod ansatz;
mod loss;
mod train;

pub use ansatz::{encode_time, qpinn_forward, qpinn_mse, AnsatzSpec, Axis, ObservableMap, ParamSlot, ParamVector};
pub use loss::{gradient, loss_and_gradient, physics_loss, physics_loss_with, LossComponents, LossProblem, LossWeights};
pub use train::{
    clip_gradient, init_params, train, train_from, Adam, StopReason, TraceRecord, TrainConfig, TrainTrace,
};
