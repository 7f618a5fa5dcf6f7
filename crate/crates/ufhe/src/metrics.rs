//! Lightweight instrumentation: global wall-time accounting by kernel
//! category and per-comparison operation counters by pipeline phase.
//!
//! Timing uses process-wide atomics so hot loops pay one `Instant` read
//! and two relaxed atomic adds per scope; counters are plain structs
//! owned by the computation that produces them. Both are observational
//! only, with one exception: the comparison layer checks its own counter
//! against per-digit multiplication budgets and refuses to exceed them.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

/// Kernel categories for wall-time accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    /// Evaluation-domain conversions (forward and inverse).
    Transform,
    /// Pointwise residue arithmetic on evaluation vectors.
    Elementwise,
    /// CRT composition / decomposition and modulus switching.
    Crt,
    /// Everything else (key setup, bookkeeping, serialization).
    Other,
}

const CATEGORY_COUNT: usize = 4;

impl Category {
    fn index(self) -> usize {
        match self {
            Category::Transform => 0,
            Category::Elementwise => 1,
            Category::Crt => 2,
            Category::Other => 3,
        }
    }

    /// Stable lowercase name, used in reports.
    pub fn name(self) -> &'static str {
        match self {
            Category::Transform => "transform",
            Category::Elementwise => "elementwise",
            Category::Crt => "crt",
            Category::Other => "other",
        }
    }

    /// All categories in index order.
    pub fn all() -> [Category; CATEGORY_COUNT] {
        [
            Category::Transform,
            Category::Elementwise,
            Category::Crt,
            Category::Other,
        ]
    }
}

static NANOS: [AtomicU64; CATEGORY_COUNT] = [
    AtomicU64::new(0),
    AtomicU64::new(0),
    AtomicU64::new(0),
    AtomicU64::new(0),
];
static CALLS: [AtomicU64; CATEGORY_COUNT] = [
    AtomicU64::new(0),
    AtomicU64::new(0),
    AtomicU64::new(0),
    AtomicU64::new(0),
];

/// RAII guard that adds its lifetime to a category's total.
pub struct ScopedTimer {
    cat: Category,
    start: Instant,
}

impl ScopedTimer {
    /// Starts timing `cat`; the elapsed time is recorded on drop.
    pub fn new(cat: Category) -> Self {
        Self {
            cat,
            start: Instant::now(),
        }
    }
}

impl Drop for ScopedTimer {
    fn drop(&mut self) {
        let ns = self.start.elapsed().as_nanos() as u64;
        let i = self.cat.index();
        NANOS[i].fetch_add(ns, Ordering::Relaxed);
        CALLS[i].fetch_add(1, Ordering::Relaxed);
    }
}

/// Immutable snapshot of the global timing state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TimingSnapshot {
    /// Accumulated nanoseconds per category, in [`Category::all`] order.
    pub nanos: [u64; CATEGORY_COUNT],
    /// Number of timed scopes per category.
    pub calls: [u64; CATEGORY_COUNT],
}

impl TimingSnapshot {
    /// Nanoseconds recorded for one category.
    pub fn nanos_for(&self, cat: Category) -> u64 {
        self.nanos[cat.index()]
    }

    /// Scope count recorded for one category.
    pub fn calls_for(&self, cat: Category) -> u64 {
        self.calls[cat.index()]
    }

    /// Difference against an earlier snapshot.
    pub fn since(&self, earlier: &TimingSnapshot) -> TimingSnapshot {
        let mut out = TimingSnapshot::default();
        for i in 0..CATEGORY_COUNT {
            out.nanos[i] = self.nanos[i].saturating_sub(earlier.nanos[i]);
            out.calls[i] = self.calls[i].saturating_sub(earlier.calls[i]);
        }
        out
    }
}

/// Reads the current global totals.
pub fn snapshot() -> TimingSnapshot {
    let mut s = TimingSnapshot::default();
    for i in 0..CATEGORY_COUNT {
        s.nanos[i] = NANOS[i].load(Ordering::Relaxed);
        s.calls[i] = CALLS[i].load(Ordering::Relaxed);
    }
    s
}

/// Resets all global totals to zero.
pub fn reset() {
    for i in 0..CATEGORY_COUNT {
        NANOS[i].store(0, Ordering::Relaxed);
        CALLS[i].store(0, Ordering::Relaxed);
    }
}

/// Phases of an end-to-end comparison, for operation counting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Digit decomposition, encoding, and input preparation.
    Extraction,
    /// Per-digit less-than / equality circuit evaluation.
    LtEq,
    /// Rotation-and-multiply aggregation rounds.
    ShiftMul,
    /// Rotation-and-add aggregation rounds.
    ShiftAdd,
}

const PHASE_COUNT: usize = 4;

impl Phase {
    fn index(self) -> usize {
        match self {
            Phase::Extraction => 0,
            Phase::LtEq => 1,
            Phase::ShiftMul => 2,
            Phase::ShiftAdd => 3,
        }
    }

    /// Stable name, used in reports.
    pub fn name(self) -> &'static str {
        match self {
            Phase::Extraction => "extraction",
            Phase::LtEq => "lt_eq",
            Phase::ShiftMul => "shift_mul",
            Phase::ShiftAdd => "shift_add",
        }
    }

    /// All phases in index order.
    pub fn all() -> [Phase; PHASE_COUNT] {
        [Phase::Extraction, Phase::LtEq, Phase::ShiftMul, Phase::ShiftAdd]
    }
}

/// Operation tallies for a single phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PhaseCounts {
    /// Ciphertext-times-ciphertext multiplications.
    pub nonscalar_mults: u64,
    /// Ciphertext-times-plaintext multiplications.
    pub scalar_mults: u64,
    /// Ciphertext additions and subtractions.
    pub adds: u64,
    /// Slot rotations (each consuming one key switch).
    pub rotations: u64,
}

impl PhaseCounts {
    fn add(&mut self, other: &PhaseCounts) {
        self.nonscalar_mults += other.nonscalar_mults;
        self.scalar_mults += other.scalar_mults;
        self.adds += other.adds;
        self.rotations += other.rotations;
    }
}

/// Per-phase operation counter carried through a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpCounter {
    counts: [PhaseCounts; PHASE_COUNT],
}

impl OpCounter {
    /// Fresh all-zero counter.
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a ciphertext-ciphertext multiplication.
    pub fn count_nonscalar(&mut self, phase: Phase, n: u64) {
        self.counts[phase.index()].nonscalar_mults += n;
    }

    /// Records a ciphertext-plaintext multiplication.
    pub fn count_scalar(&mut self, phase: Phase, n: u64) {
        self.counts[phase.index()].scalar_mults += n;
    }

    /// Records additions or subtractions.
    pub fn count_add(&mut self, phase: Phase, n: u64) {
        self.counts[phase.index()].adds += n;
    }

    /// Records slot rotations.
    pub fn count_rotation(&mut self, phase: Phase, n: u64) {
        self.counts[phase.index()].rotations += n;
    }

    /// Tallies for one phase.
    pub fn phase(&self, phase: Phase) -> &PhaseCounts {
        &self.counts[phase.index()]
    }

    /// Sum over all phases.
    pub fn total(&self) -> PhaseCounts {
        let mut t = PhaseCounts::default();
        for c in &self.counts {
            t.add(c);
        }
        t
    }

    /// Accumulates another counter into this one.
    pub fn merge(&mut self, other: &OpCounter) {
        for (mine, theirs) in self.counts.iter_mut().zip(other.counts.iter()) {
            mine.add(theirs);
        }
    }
}
