//! The three demo applications behind `ufhe app`: homomorphic sorting,
//! tournament minimum, and the straightlined private query. Every run
//! verifies its decrypted output against the plaintext answer before
//! reporting.

use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use serde_json::json;
use ufhe::bgv::Ciphertext;
use ufhe::compare::ints::{digits_for_bits, from_digits};
use ufhe::compare::{setup, ClientKeys, CompareEngine};
use ufhe::metrics::{self, OpCounter};
use ufhe::pipeline::{ComparePipeline, TAG_ADD, TAG_MULT, TAG_POWER};
use ufhe::rng::SplitRng;
use ufhe::slotmgr::{apply_compaction, encode_usage, plan_compaction, should_compact};
use ufhe::transform::global_plan_cache;

use crate::params::{ParamSet, MAX_BUILD_N};
use crate::report::{category_timing, phase_ops, Report, SlotSection, WallStats};

pub struct AppConfig {
    pub set: ParamSet,
    pub n: usize,
    pub bits: u32,
    pub query: String,
    pub op2: u64,
    pub compaction: bool,
    pub nonblocking: bool,
    pub workers: usize,
    pub seed: u64,
    pub deterministic: bool,
}

fn build_engine(cfg: &AppConfig) -> Result<(Arc<CompareEngine>, ClientKeys, SplitRng)> {
    let n = cfg.set.ring_degree();
    if n > MAX_BUILD_N {
        bail!(
            "capacity exceeded: {} has ring degree {n} (> {MAX_BUILD_N}); \
             run a derived set such as t5 or t17 instead",
            cfg.set.name
        );
    }
    let workers = if cfg.deterministic { 1 } else { cfg.workers };
    let params = cfg.set.compare_params(None)?;
    let (engine, keys) =
        setup(params, workers, cfg.seed, global_plan_cache()).context("engine setup")?;
    let rng = SplitRng::from_seed(cfg.seed ^ 0xA55);
    Ok((engine, keys, rng))
}

fn levels_hint(e: anyhow::Error) -> anyhow::Error {
    let text = format!("{e:#}");
    if text.contains("out of levels") || text.contains("noise budget exhausted") {
        e.context("the level budget ran out; raise `levels` in the parameter set")
    } else {
        e
    }
}

/// Uniform draw over the full `bits`-bit range.
fn sample(rng: &mut SplitRng, bits: u32) -> u64 {
    if bits >= 64 {
        rng.next_u64()
    } else {
        rng.below(1u64 << bits)
    }
}

/// Compacts sparse per-item result ciphertexts (useful digits at
/// positions `0..k`) and re-reads every item through the move table to
/// prove values survived. Returns the section plus the compacted count.
fn compact_outputs(
    engine: &Arc<CompareEngine>,
    keys: &ClientKeys,
    outputs: &[Ciphertext],
    expected: &[u64],
    k: usize,
    counter: &mut OpCounter,
) -> Result<(SlotSection, bool)> {
    let l = engine.positions();
    let usages: Vec<_> = (0..outputs.len())
        .map(|i| encode_usage(k, l, &format!("result[{i}]")))
        .collect::<ufhe::Result<_>>()?;
    let plan = plan_compaction(&usages)?;
    let before = plan.total_useful() as f64 / (outputs.len() * l) as f64;
    if !should_compact(engine, outputs, &plan) {
        return Ok((
            SlotSection {
                utilization_before: before,
                utilization_after: before,
                ciphertexts_before: outputs.len(),
                ciphertexts_after: outputs.len(),
                moves: plan.moves().len(),
                applied: false,
            },
            true,
        ));
    }
    let packed = apply_compaction(engine, outputs, &plan, counter)?;
    // Re-read every item out of the packed ciphertexts.
    let decoded: Vec<Vec<u64>> = packed
        .iter()
        .map(|ct| engine.decrypt_positions(&keys.sk, ct))
        .collect::<ufhe::Result<_>>()?;
    let mut ok = true;
    for (i, &want) in expected.iter().enumerate() {
        let mut digits = vec![0u64; k];
        for m in plan.moves() {
            if m.src_ct == i {
                digits[m.src_pos] = decoded[m.dst_ct][m.dst_pos];
            }
        }
        ok &= from_digits(&digits, engine.alphabet()) == want;
    }
    Ok((
        SlotSection {
            utilization_before: before,
            utilization_after: plan.total_useful() as f64 / (packed.len() * l) as f64,
            ciphertexts_before: outputs.len(),
            ciphertexts_after: packed.len(),
            moves: plan.moves().len(),
            applied: true,
        },
        ok,
    ))
}

pub fn run_sort(cfg: &AppConfig) -> Result<Report> {
    let (engine, keys, mut rng) = build_engine(cfg)?;
    ensure!(
        cfg.n as u64 <= cfg.set.p,
        "rank indicators live mod p: need n <= p, got n = {} at p = {}",
        cfg.n,
        cfg.set.p
    );
    engine
        .layout()
        .map_err(|e| anyhow::anyhow!("{} cannot rotate slots: {e}", cfg.set.name))?;
    let k = digits_for_bits(engine.alphabet(), cfg.bits);
    ensure!(
        k <= engine.positions(),
        "{}-bit items need {k} digits but the set has {} positions",
        cfg.bits,
        engine.positions()
    );
    let values: Vec<u64> = (0..cfg.n).map(|_| sample(&mut rng, cfg.bits)).collect();
    let mut expected = values.clone();
    expected.sort_unstable();

    metrics::reset();
    let mut counter = OpCounter::new();
    let t0 = Instant::now();
    let items: Vec<Ciphertext> = values
        .iter()
        .map(|&v| engine.encrypt_ints(&keys.pk, &[v], k, &mut rng))
        .collect::<ufhe::Result<_>>()?;
    let sorted_cts = engine
        .sort_rank(&items, k, &mut counter)
        .map_err(|e| levels_hint(e.into()))?;
    let mut verified = true;
    let mut got = Vec::with_capacity(cfg.n);
    for (i, ct) in sorted_cts.iter().enumerate() {
        let by_pos = engine.decrypt_positions(&keys.sk, ct)?;
        let v = from_digits(&by_pos[..k], engine.alphabet());
        got.push(v);
        verified &= v == expected[i];
    }
    let (slots, compaction_ok) = if cfg.compaction {
        let (section, ok) =
            compact_outputs(&engine, &keys, &sorted_cts, &expected, k, &mut counter)?;
        (Some(section), ok)
    } else {
        (None, true)
    };
    verified &= compaction_ok;
    let wall = WallStats::from_millis(&[t0.elapsed().as_secs_f64() * 1e3]);

    Ok(Report {
        command: "app-sort".into(),
        param: cfg.set.clone(),
        seed: cfg.seed,
        workers: if cfg.deterministic { 1 } else { cfg.workers },
        deterministic: cfg.deterministic,
        verified,
        wall_ms: wall,
        ops: phase_ops(&counter),
        timing: category_timing(&metrics::snapshot()),
        slots,
        details: json!({
            "n": cfg.n,
            "bits": cfg.bits,
            "digits": k,
            "input": values,
            "output": got,
            "expected": expected,
        }),
    })
}

pub fn run_min(cfg: &AppConfig) -> Result<Report> {
    let (engine, keys, mut rng) = build_engine(cfg)?;
    engine
        .layout()
        .map_err(|e| anyhow::anyhow!("{} cannot rotate slots: {e}", cfg.set.name))?;
    let k = digits_for_bits(engine.alphabet(), cfg.bits);
    ensure!(
        k <= engine.positions(),
        "{}-bit items need {k} digits but the set has {} positions",
        cfg.bits,
        engine.positions()
    );
    let values: Vec<u64> = (0..cfg.n).map(|_| sample(&mut rng, cfg.bits)).collect();
    let expected = *values.iter().min().expect("nonempty input");

    metrics::reset();
    let mut counter = OpCounter::new();
    let t0 = Instant::now();
    let items: Vec<Ciphertext> = values
        .iter()
        .map(|&v| engine.encrypt_ints(&keys.pk, &[v], k, &mut rng))
        .collect::<ufhe::Result<_>>()?;
    let min_ct = engine
        .min_tournament(&items, k, &mut counter)
        .map_err(|e| levels_hint(e.into()))?;
    let by_pos = engine.decrypt_positions(&keys.sk, &min_ct)?;
    let got = from_digits(&by_pos[..k], engine.alphabet());
    let mut verified = got == expected;
    let slots = if cfg.compaction {
        let (section, ok) = compact_outputs(
            &engine,
            &keys,
            std::slice::from_ref(&min_ct),
            &[expected],
            k,
            &mut counter,
        )?;
        verified &= ok;
        Some(section)
    } else {
        None
    };
    let wall = WallStats::from_millis(&[t0.elapsed().as_secs_f64() * 1e3]);

    Ok(Report {
        command: "app-min".into(),
        param: cfg.set.clone(),
        seed: cfg.seed,
        workers: if cfg.deterministic { 1 } else { cfg.workers },
        deterministic: cfg.deterministic,
        verified,
        wall_ms: wall,
        ops: phase_ops(&counter),
        timing: category_timing(&metrics::snapshot()),
        slots,
        details: json!({
            "n": cfg.n,
            "bits": cfg.bits,
            "digits": k,
            "input": values,
            "minimum": got,
            "expected": expected,
        }),
    })
}

pub fn run_private_query(cfg: &AppConfig) -> Result<Report> {
    let (engine, keys, mut rng) = build_engine(cfg)?;
    ensure!(cfg.op2 >= 1, "op2 must be at least 1");
    let tag = match cfg.query.as_str() {
        "add" => TAG_ADD,
        "mult" => TAG_MULT,
        "power" => TAG_POWER,
        other => bail!("unknown query kind {other:?} (want add, mult, or power)"),
    };
    let p = cfg.set.p;
    let l = engine.positions();
    let data_vals: Vec<u64> = (0..l).map(|_| rng.below(p)).collect();
    let op1_vals: Vec<u64> = (0..l).map(|_| rng.below(p)).collect();
    let oracle: Vec<u64> = data_vals
        .iter()
        .zip(&op1_vals)
        .map(|(&d, &o)| match tag {
            TAG_ADD => (d + o) % p,
            TAG_MULT => d * o % p,
            _ => pow_mod(d, cfg.op2, p),
        })
        .collect();

    metrics::reset();
    let mut counter = OpCounter::new();
    let nonblocking = !cfg.deterministic && cfg.nonblocking;
    let t0 = Instant::now();
    let data = engine.encrypt_positions(&keys.pk, &data_vals, &mut rng)?;
    let op1 = engine.encrypt_positions(&keys.pk, &op1_vals, &mut rng)?;
    let q = engine.encrypt_positions(&keys.pk, &vec![tag; l], &mut rng)?;
    let pipeline = ComparePipeline::new(Arc::clone(&engine), nonblocking);
    let run = pipeline
        .private_query(&q, &op1, cfg.op2, &data, &mut counter)
        .map_err(|e| levels_hint(e.into()))?;
    let got = engine.decrypt_positions(&keys.sk, &run.result)?;
    let verified = got == oracle;
    let wall = WallStats::from_millis(&[t0.elapsed().as_secs_f64() * 1e3]);

    Ok(Report {
        command: "app-private-query".into(),
        param: cfg.set.clone(),
        seed: cfg.seed,
        workers: if cfg.deterministic { 1 } else { cfg.workers },
        deterministic: cfg.deterministic,
        verified,
        wall_ms: wall,
        ops: phase_ops(&counter),
        timing: category_timing(&metrics::snapshot()),
        slots: None,
        details: json!({
            "query": cfg.query,
            "op2": cfg.op2,
            "nonblocking": nonblocking,
            "helper_ms": run.helper.as_secs_f64() * 1e3,
            "main_ms": run.main.as_secs_f64() * 1e3,
            "total_ms": run.total.as_secs_f64() * 1e3,
            "result": got,
            "expected": oracle,
        }),
    })
}

fn pow_mod(mut base: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    base %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        e >>= 1;
    }
    acc
}
