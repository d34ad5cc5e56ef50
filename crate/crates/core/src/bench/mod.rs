//! Multi-seed experiment harness: configs, per-seed reports, aggregation,
//! window ablation, method comparison and acceptance-band checks.

mod config;
mod harness;
mod report;

pub use config::*;
pub use harness::*;
pub use report::*;
