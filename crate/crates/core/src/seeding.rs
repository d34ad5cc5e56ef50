//! Seed expansion into independent random streams.
//!
//! A single master seed drives a run. Each consumer draws from its own ChaCha
//! stream keyed by `(stage, index)`, so adding a sample never shifts the
//! randomness seen by any other sample.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const RESERVOIR: u32 = 0;
pub const TRAIN_SHOTS: u32 = 1;
pub const TEST_SHOTS: u32 = 2;
pub const QPINN_INIT: u32 = 3;
pub const ESN_WEIGHTS: u32 = 4;

pub fn stream_rng(seed: u64, stage: u32, index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((u64::from(stage) << 32) | u64::from(index));
    rng
}
