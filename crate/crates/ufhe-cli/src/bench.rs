//! The comparison microbenchmark: repeated end-to-end runs
//! (pack, encrypt, compare, decrypt, verify) over a fixed bank of
//! independent jobs, with the integer width chosen as the largest the
//! parameter set can actually carry.

use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde_json::json;
use ufhe::compare::ints::digits_for_bits;
use ufhe::compare::{setup, CircuitKind, CompareEngine, ClientKeys};
use ufhe::error::Error as UfheError;
use ufhe::metrics::{self, OpCounter};
use ufhe::rng::SplitRng;
use ufhe::transform::global_plan_cache;

use crate::params::{ParamSet, MAX_BUILD_N};
use crate::report::{category_timing, phase_ops, Report, WallStats};

/// Independent comparison jobs per repetition; each job is one SIMD
/// batch (or one wide-integer pair), so the worker pool always has this
/// much to chew on.
pub const JOBS_PER_REP: usize = 8;

/// The widths tried in order; the first that fits the level budget and
/// the rotation support of the parameter set wins.
const WIDTHS: [u32; 7] = [64, 32, 16, 8, 4, 2, 1];

pub struct BenchConfig {
    pub set: ParamSet,
    pub circuit: Option<CircuitKind>,
    pub reps: usize,
    pub workers: usize,
    pub seed: u64,
    pub deterministic: bool,
}

fn degradation(e: &UfheError) -> bool {
    matches!(
        e,
        UfheError::OutOfLevels
            | UfheError::NoiseBudgetExhausted { .. }
            | UfheError::MissingGaloisKey { .. }
            | UfheError::CapacityExceeded { .. }
    )
}

/// Picks the widest supported integer width by probing one comparison
/// per candidate on throwaway data.
fn pick_width(
    engine: &Arc<CompareEngine>,
    keys: &ClientKeys,
    rng: &mut SplitRng,
) -> Result<(u32, usize)> {
    for bits in WIDTHS {
        let k = digits_for_bits(engine.alphabet(), bits);
        if k > 1 && engine.layout().is_err() {
            // No rotations: only single-digit comparisons are possible.
            continue;
        }
        let mut counter = OpCounter::new();
        let attempt = if k <= engine.positions() {
            let ca = engine.encrypt_ints(&keys.pk, &[0], k, rng)?;
            let cb = engine.encrypt_ints(&keys.pk, &[1], k, rng)?;
            engine.compare_packed(&ca, &cb, k, &mut counter).map(|_| ())
        } else {
            let xs = engine.encrypt_wide_int(&keys.pk, 0, k, rng)?;
            let ys = engine.encrypt_wide_int(&keys.pk, 1, k, rng)?;
            engine.compare_wide(&xs, &ys, k, &mut counter).map(|_| ())
        };
        match attempt {
            Ok(()) => return Ok((bits, k)),
            Err(e) if degradation(&e) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    bail!("no supported comparison width at this parameter set");
}

/// Uniform draw over the full `bits`-bit range.
fn sample(rng: &mut SplitRng, bits: u32) -> u64 {
    if bits >= 64 {
        rng.next_u64()
    } else {
        rng.below(1u64 << bits)
    }
}

pub fn run(cfg: &BenchConfig) -> Result<Report> {
    let n = cfg.set.ring_degree();
    if n > MAX_BUILD_N {
        bail!(
            "capacity exceeded: {} has ring degree {n} (> {MAX_BUILD_N}); \
             full-size sets are recorded data on this machine — run a derived set \
             such as t3a or t3b instead",
            cfg.set.name
        );
    }
    let workers = if cfg.deterministic { 1 } else { cfg.workers };
    let params = cfg.set.compare_params(cfg.circuit)?;
    let (engine, keys) =
        setup(params, workers, cfg.seed, global_plan_cache()).context("engine setup")?;
    let mut rng = SplitRng::from_seed(cfg.seed ^ 0xB47C);
    let (bits, k) = pick_width(&engine, &keys, &mut rng)?;
    let wide = k > engine.positions();
    let ints_per_job = if wide { 1 } else { engine.ints_per_ct(k) };

    metrics::reset();
    let t_all = Instant::now();
    let mut rep_ms = Vec::with_capacity(cfg.reps);
    let mut merged = OpCounter::new();
    let mut verified = true;
    for _ in 0..cfg.reps {
        let t_rep = Instant::now();
        if wide {
            // One integer pair per job; the pairs fan out across workers
            // even though each pair is internally sequential.
            let mut pairs = Vec::with_capacity(JOBS_PER_REP);
            let mut expect = Vec::with_capacity(JOBS_PER_REP);
            for _ in 0..JOBS_PER_REP {
                let a = sample(&mut rng, bits);
                let b = sample(&mut rng, bits);
                let xs = engine.encrypt_wide_int(&keys.pk, a, k, &mut rng)?;
                let ys = engine.encrypt_wide_int(&keys.pk, b, k, &mut rng)?;
                pairs.push((xs, ys));
                expect.push((a, b));
            }
            let (verdicts, counter) = engine.compare_wide_batch(pairs, k)?;
            merged.merge(&counter);
            for (v, &(a, b)) in verdicts.iter().zip(&expect) {
                let lt = engine.decrypt_positions(&keys.sk, &v.lt)?[0];
                let eq = engine.decrypt_positions(&keys.sk, &v.eq)?[0];
                verified &= lt == u64::from(a < b) && eq == u64::from(a == b);
            }
        } else {
            let mut pairs = Vec::with_capacity(JOBS_PER_REP);
            let mut expect = Vec::with_capacity(JOBS_PER_REP);
            for _ in 0..JOBS_PER_REP {
                let av: Vec<u64> = (0..ints_per_job).map(|_| sample(&mut rng, bits)).collect();
                let bv: Vec<u64> = (0..ints_per_job).map(|_| sample(&mut rng, bits)).collect();
                let ca = engine.encrypt_ints(&keys.pk, &av, k, &mut rng)?;
                let cb = engine.encrypt_ints(&keys.pk, &bv, k, &mut rng)?;
                pairs.push((ca, cb));
                expect.push((av, bv));
            }
            let (verdicts, counter) = engine.compare_batch(pairs, k)?;
            merged.merge(&counter);
            for (v, (av, bv)) in verdicts.iter().zip(&expect) {
                let lt = engine.read_block_bits(&keys.sk, &v.lt, k)?;
                let eq = engine.read_block_bits(&keys.sk, &v.eq, k)?;
                for i in 0..ints_per_job {
                    verified &= lt[i] == u64::from(av[i] < bv[i]);
                    verified &= eq[i] == u64::from(av[i] == bv[i]);
                }
            }
        }
        rep_ms.push(t_rep.elapsed().as_secs_f64() * 1e3);
    }
    let timing = metrics::snapshot();
    let total_ms = t_all.elapsed().as_secs_f64() * 1e3;
    let wall = WallStats::from_millis(&rep_ms);
    let ints_per_rep = JOBS_PER_REP * ints_per_job;

    let mut set = cfg.set.clone();
    if let Some(kind) = cfg.circuit {
        set.circuit = kind.name().to_string();
    }
    Ok(Report {
        command: "bench-compare".into(),
        param: set,
        seed: cfg.seed,
        workers,
        deterministic: cfg.deterministic,
        verified,
        wall_ms: wall.clone(),
        ops: phase_ops(&merged),
        timing: category_timing(&timing),
        slots: None,
        details: json!({
            "bits": bits,
            "digits": k,
            "wide": wide,
            "ints_per_job": ints_per_job,
            "jobs_per_rep": JOBS_PER_REP,
            "ints_per_rep": ints_per_rep,
            "per_int_ms": wall.mean_ms / ints_per_rep as f64,
            "degraded_width": bits < 64,
            "total_ms": total_ms,
        }),
    })
}
