//! Quantum reservoir computing, a variational quantum PINN and a classical
//! echo state network, benchmarked on chaotic attractors.
//!
//! Everything runs on an in-process statevector simulator ([`qsim`]); all
//! randomness is seeded and reproducible.

pub mod bench;
pub mod dynamics;
pub mod error;
pub mod esn;
pub mod qpinn;
pub mod qrc;
pub mod qsim;
pub mod seeding;

pub use error::{Error, Result};
