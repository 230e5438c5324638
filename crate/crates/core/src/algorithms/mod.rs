//! Building and repairing spanning forests.

pub mod build;
pub mod repair;

pub use build::{build_mst, build_st, run_cycle_step, BuildOptions, BuildOutcome, CycleStep, PhaseConfig};
pub use repair::{repair, Forest, RepairOutcome, UpdateEvent};
