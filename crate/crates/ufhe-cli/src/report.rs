//! The machine-readable run report: one JSON document per command with
//! wall-clock statistics, per-phase operation counts, the kernel timing
//! breakdown, and slot-usage numbers where compaction applies.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use ufhe::metrics::{Category, OpCounter, Phase, TimingSnapshot};

use crate::params::ParamSet;

/// Wall-clock summary over the timed repetitions, in milliseconds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WallStats {
    pub reps: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub stddev_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

impl WallStats {
    /// Summarizes per-rep durations; an empty slice yields all zeros.
    pub fn from_millis(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self {
                reps: 0,
                mean_ms: 0.0,
                median_ms: 0.0,
                stddev_ms: 0.0,
                min_ms: 0.0,
                max_ms: 0.0,
            };
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite durations"));
        let median = if sorted.len() % 2 == 1 {
            sorted[sorted.len() / 2]
        } else {
            (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2]) / 2.0
        };
        Self {
            reps: samples.len(),
            mean_ms: mean,
            median_ms: median,
            stddev_ms: var.sqrt(),
            min_ms: sorted[0],
            max_ms: *sorted.last().expect("nonempty"),
        }
    }
}

/// Operation tallies for one comparison phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseOps {
    pub phase: String,
    pub nonscalar_mults: u64,
    pub scalar_mults: u64,
    pub adds: u64,
    pub rotations: u64,
}

/// Converts a counter into its per-phase report rows.
pub fn phase_ops(counter: &OpCounter) -> Vec<PhaseOps> {
    Phase::all()
        .iter()
        .map(|&ph| {
            let c = counter.phase(ph);
            PhaseOps {
                phase: ph.name().to_string(),
                nonscalar_mults: c.nonscalar_mults,
                scalar_mults: c.scalar_mults,
                adds: c.adds,
                rotations: c.rotations,
            }
        })
        .collect()
}

/// Wall time attributed to one kernel category.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoryTiming {
    pub category: String,
    pub millis: f64,
    pub calls: u64,
    /// Share of the total attributed time, 0 when nothing was recorded.
    pub fraction: f64,
}

/// Converts a timing snapshot delta into report rows.
pub fn category_timing(delta: &TimingSnapshot) -> Vec<CategoryTiming> {
    let total: u64 = Category::all().iter().map(|&c| delta.nanos_for(c)).sum();
    Category::all()
        .iter()
        .map(|&c| CategoryTiming {
            category: c.name().to_string(),
            millis: delta.nanos_for(c) as f64 / 1e6,
            calls: delta.calls_for(c),
            fraction: if total == 0 {
                0.0
            } else {
                delta.nanos_for(c) as f64 / total as f64
            },
        })
        .collect()
}

/// Slot usage around a compaction pass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlotSection {
    pub utilization_before: f64,
    pub utilization_after: f64,
    pub ciphertexts_before: usize,
    pub ciphertexts_after: usize,
    pub moves: usize,
    pub applied: bool,
}

/// One command's full report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub param: ParamSet,
    pub seed: u64,
    pub workers: usize,
    pub deterministic: bool,
    pub verified: bool,
    pub wall_ms: WallStats,
    pub ops: Vec<PhaseOps>,
    pub timing: Vec<CategoryTiming>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slots: Option<SlotSection>,
    /// Command-specific numbers (documented per command).
    pub details: serde_json::Value,
}

impl Report {
    /// Writes the report as pretty JSON.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).context("serializing report")?;
        std::fs::write(path, text + "\n")
            .with_context(|| format!("writing report to {}", path.display()))?;
        Ok(())
    }

    /// Human-readable summary on stdout.
    pub fn print_summary(&self) {
        println!(
            "{}: param {} (p = {}, m = {}, {}), seed {}, workers {}",
            self.command, self.param.name, self.param.p, self.param.m, self.param.circuit,
            self.seed, self.workers
        );
        println!(
            "  wall: mean {:.1} ms, median {:.1} ms, stddev {:.1} ms over {} rep(s)",
            self.wall_ms.mean_ms, self.wall_ms.median_ms, self.wall_ms.stddev_ms,
            self.wall_ms.reps
        );
        let total = self.ops.iter().fold((0u64, 0u64, 0u64, 0u64), |acc, o| {
            (
                acc.0 + o.nonscalar_mults,
                acc.1 + o.scalar_mults,
                acc.2 + o.adds,
                acc.3 + o.rotations,
            )
        });
        println!(
            "  ops: {} nonscalar, {} scalar, {} add, {} rotate",
            total.0, total.1, total.2, total.3
        );
        for t in &self.timing {
            if t.calls > 0 {
                println!(
                    "  time[{}]: {:.1} ms ({:.0}%, {} calls)",
                    t.category,
                    t.millis,
                    t.fraction * 100.0,
                    t.calls
                );
            }
        }
        if let Some(s) = &self.slots {
            println!(
                "  slots: {:.1}% over {} ct(s) -> {:.1}% over {} ct(s){}",
                s.utilization_before * 100.0,
                s.ciphertexts_before,
                s.utilization_after * 100.0,
                s.ciphertexts_after,
                if s.applied { "" } else { " (not applied)" }
            );
        }
        println!("  verified: {}", if self.verified { "yes" } else { "NO" });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wall_stats_basic() {
        let s = WallStats::from_millis(&[4.0, 2.0, 6.0, 8.0]);
        assert_eq!(s.reps, 4);
        assert!((s.mean_ms - 5.0).abs() < 1e-9);
        assert!((s.median_ms - 5.0).abs() < 1e-9);
        assert!((s.min_ms - 2.0).abs() < 1e-9);
        assert!((s.max_ms - 8.0).abs() < 1e-9);
        // Population stddev of {2,4,6,8} around 5 is sqrt(5).
        assert!((s.stddev_ms - 5f64.sqrt()).abs() < 1e-9);
        let one = WallStats::from_millis(&[3.5]);
        assert_eq!(one.reps, 1);
        assert_eq!(one.stddev_ms, 0.0);
        assert_eq!(WallStats::from_millis(&[]).reps, 0);
    }

    #[test]
    fn counter_rows_cover_all_phases() {
        let mut c = OpCounter::new();
        c.count_nonscalar(Phase::LtEq, 3);
        c.count_rotation(Phase::ShiftMul, 2);
        let rows = phase_ops(&c);
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[1].phase, "lt_eq");
        assert_eq!(rows[1].nonscalar_mults, 3);
        assert_eq!(rows[2].rotations, 2);
    }

    #[test]
    fn timing_fractions_sum_to_one_or_zero() {
        let zero = category_timing(&TimingSnapshot::default());
        assert!(zero.iter().all(|t| t.fraction == 0.0));
        let mut snap = TimingSnapshot::default();
        snap.nanos[0] = 3_000_000;
        snap.nanos[2] = 1_000_000;
        snap.calls[0] = 5;
        let rows = category_timing(&snap);
        let total: f64 = rows.iter().map(|t| t.fraction).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert_eq!(rows[0].category, "transform");
        assert!((rows[0].fraction - 0.75).abs() < 1e-9);
    }
}
