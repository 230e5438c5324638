//! Process-wide counters for model invariants.
//!
//! Every check performed by the runtime and the algorithm drivers is counted
//! here, so a test run can report how many checks ran and how many failed.

use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Invariant {
    /// No physical message exceeds `W_max` bits.
    MessageWidth,
    /// Every edge is marked by both endpoints or by neither.
    ProperlyMarked,
    /// No protocol state survives a repair.
    Impromptu,
    /// Deliveries equal sends at quiescence.
    ExactlyOnce,
}

pub const ALL: [Invariant; 4] = [
    Invariant::MessageWidth,
    Invariant::ProperlyMarked,
    Invariant::Impromptu,
    Invariant::ExactlyOnce,
];

static CHECKS: [AtomicU64; 4] = [const { AtomicU64::new(0) }; 4];
static VIOLATIONS: [AtomicU64; 4] = [const { AtomicU64::new(0) }; 4];

pub fn record(inv: Invariant, ok: bool) {
    record_many(inv, 1, u64::from(!ok));
}

pub fn record_many(inv: Invariant, checks: u64, violations: u64) {
    CHECKS[inv as usize].fetch_add(checks, Ordering::Relaxed);
    if violations > 0 {
        VIOLATIONS[inv as usize].fetch_add(violations, Ordering::Relaxed);
    }
}

pub fn checks(inv: Invariant) -> u64 {
    CHECKS[inv as usize].load(Ordering::Relaxed)
}

pub fn violations(inv: Invariant) -> u64 {
    VIOLATIONS[inv as usize].load(Ordering::Relaxed)
}

impl Invariant {
    pub fn name(self) -> &'static str {
        match self {
            Invariant::MessageWidth => "message-width",
            Invariant::ProperlyMarked => "properly-marked",
            Invariant::Impromptu => "impromptu-memory",
            Invariant::ExactlyOnce => "exactly-once",
        }
    }
}
