//! Toy-scale invariant suites behind `ufhe selftest`: each suite
//! re-checks one layer of the stack against an independent reference
//! and reports its pass count; any failure turns into a nonzero exit.
//!
//! The fault-injection flag corrupts the cached transform plans before
//! the suites run, demonstrating that the checks actually bite.

use anyhow::{anyhow, bail, ensure, Result};
use ufhe::arith::{gen_ntt_primes, miller_rabin, mult_order, Modulus};
use ufhe::bgv::{BgvContext, BgvParams};
use ufhe::compare::{setup, CompareParams};
use ufhe::metrics::OpCounter;
use ufhe::rng::SplitRng;
use ufhe::serialize;
use ufhe::transform::PlanCache;

type Suite = (&'static str, fn(&PlanCache) -> Result<u64>);

const SUITES: [Suite; 7] = [
    ("arith", suite_arith),
    ("transform", suite_transform),
    ("plan-reuse", suite_plan_reuse),
    ("filter", suite_filter),
    ("bgv", suite_bgv),
    ("circuits", suite_circuits),
    ("serialize", suite_serialize),
];

/// Runs all suites; returns the process exit code.
pub fn run(inject_fault: bool) -> Result<i32> {
    let cache = PlanCache::new();
    if inject_fault {
        // Warm the transform suite's plans, then corrupt them in place.
        for (m, pad) in [(91u64, 256u64), (31, 64)] {
            for q in gen_ntt_primes(m, pad, 45, 2)? {
                cache.get_or_build(m, q)?;
            }
        }
        let n = cache.inject_fault();
        println!("fault injection: corrupted {n} cached plan(s)");
    }
    let mut failures = 0usize;
    for (name, f) in SUITES {
        match f(&cache) {
            Ok(count) => println!("suite {name}: {count} checks passed"),
            Err(e) => {
                println!("suite {name}: FAILED ({e})");
                failures += 1;
            }
        }
    }
    if failures > 0 {
        println!("selftest: {failures} suite(s) failed");
        Ok(1)
    } else {
        println!("selftest: all {} suites passed", SUITES.len());
        Ok(0)
    }
}

/// Modular arithmetic against wide-integer references.
fn suite_arith(_cache: &PlanCache) -> Result<u64> {
    let mut checks = 0u64;
    let mut rng = SplitRng::from_seed(11);
    for q in [(1u64 << 45) - 229, (1u64 << 50) - 27, (1u64 << 61) - 1] {
        ensure!(miller_rabin(q), "q = {q} should be prime");
        let md = Modulus::new(q);
        for _ in 0..200 {
            let a = rng.below(q);
            let b = rng.below(q);
            let want_mul = ((a as u128 * b as u128) % q as u128) as u64;
            ensure!(md.mul(a, b) == want_mul, "mul mismatch mod {q}");
            let want_add = ((a as u128 + b as u128) % q as u128) as u64;
            ensure!(md.add(a, b) == want_add, "add mismatch mod {q}");
            checks += 2;
        }
    }
    for (composite, prime) in [(561u64, 563u64), (1105, 1103)] {
        ensure!(!miller_rabin(composite), "{composite} is composite");
        ensure!(miller_rabin(prime), "{prime} is prime");
        checks += 2;
    }
    ensure!(mult_order(3, 91) == 6, "ord_91(3)");
    ensure!(mult_order(17, 257) == 32, "ord_257(17)");
    checks += 2;
    Ok(checks)
}

/// Evaluation transform: round-trip identity and pointwise product
/// against schoolbook multiplication mod the ring polynomial.
fn suite_transform(cache: &PlanCache) -> Result<u64> {
    let mut checks = 0u64;
    let mut rng = SplitRng::from_seed(22);
    for (m, pad) in [(91u64, 256u64), (31, 64)] {
        for q in gen_ntt_primes(m, pad, 45, 2)? {
            let plan = cache.get_or_build(m, q)?;
            let n = plan.n();
            for _ in 0..5 {
                let a: Vec<u64> = (0..n).map(|_| rng.below(q)).collect();
                let b: Vec<u64> = (0..n).map(|_| rng.below(q)).collect();
                let ea = plan.to_eval(&a)?;
                ensure!(plan.from_eval(&ea)? == a, "round trip at m = {m}");
                checks += 1;
                let eb = plan.to_eval(&b)?;
                let md = *plan.modulus();
                let prod: Vec<u64> = ea.iter().zip(&eb).map(|(&x, &y)| md.mul(x, y)).collect();
                let got = plan.from_eval(&prod)?;
                // Schoolbook product with long division by the monic
                // ring polynomial as the independent reference.
                let mut conv = vec![0u64; 2 * n];
                for (i, &ai) in a.iter().enumerate() {
                    for (j, &bj) in b.iter().enumerate() {
                        conv[i + j] = md.add(conv[i + j], md.mul(ai, bj));
                    }
                }
                let phi = plan.phi();
                for i in (n..2 * n).rev() {
                    let c = conv[i];
                    if c == 0 {
                        continue;
                    }
                    conv[i] = 0;
                    for (j, &pj) in phi.iter().take(n).enumerate() {
                        conv[i - n + j] = md.sub(conv[i - n + j], md.mul(c, pj));
                    }
                }
                ensure!(got == conv[..n], "pointwise product at m = {m}");
                checks += 1;
            }
        }
    }
    Ok(checks)
}

/// The cache builds each plan exactly once.
fn suite_plan_reuse(cache: &PlanCache) -> Result<u64> {
    let mut checks = 0u64;
    let q = gen_ntt_primes(91, 256, 45, 1)?[0];
    let first = cache.get_or_build(91, q)?;
    for _ in 0..10 {
        let again = cache.get_or_build(91, q)?;
        ensure!(std::sync::Arc::ptr_eq(&first, &again), "plan identity");
        checks += 1;
    }
    ensure!(cache.build_count(91, q) == 1, "single build per key");
    checks += 1;
    Ok(checks)
}

/// Branch-free compaction filter against the branching reference.
fn suite_filter(cache: &PlanCache) -> Result<u64> {
    let mut checks = 0u64;
    let mut rng = SplitRng::from_seed(33);
    let q = gen_ntt_primes(91, 256, 45, 1)?[0];
    let plan = cache.get_or_build(91, q)?;
    for _ in 0..50 {
        let full: Vec<u64> = (0..plan.m()).map(|_| rng.below(q)).collect();
        let mut fast = vec![0u64; plan.n()];
        let mut slow = vec![0u64; plan.n()];
        plan.filter_compact(&full, &mut fast);
        plan.filter_compact_reference(&full, &mut slow);
        ensure!(fast == slow, "filter mismatch");
        checks += 1;
    }
    Ok(checks)
}

/// Encrypt/decrypt, slot arithmetic, and noise bookkeeping.
fn suite_bgv(cache: &PlanCache) -> Result<u64> {
    let mut checks = 0u64;
    let params = BgvParams {
        p: 3,
        m: 91,
        levels: 4,
        prime_bits: 45,
    };
    let ctx = BgvContext::new(params, cache)?;
    let mut rng = SplitRng::from_seed(44);
    let (sk, pk) = ctx.keygen(&mut rng);
    let rlk = ctx.gen_relin_key(&sk, &mut rng);
    let l = ctx.slots();
    for _ in 0..10 {
        let u: Vec<u64> = (0..l).map(|_| rng.below(3)).collect();
        let v: Vec<u64> = (0..l).map(|_| rng.below(3)).collect();
        let cu = ctx.encrypt_slots(&pk, &u, &mut rng)?;
        let cv = ctx.encrypt_slots(&pk, &v, &mut rng)?;
        let sum = ctx.decrypt_slots(&sk, &ctx.add(&cu, &cv)?)?;
        let prod = ctx.decrypt_slots(&sk, &ctx.he_mul(&rlk, &cu, &cv)?)?;
        for i in 0..l {
            ensure!(sum[i] == (u[i] + v[i]) % 3, "slot add");
            ensure!(prod[i] == u[i] * v[i] % 3, "slot mul");
        }
        checks += 2;
    }
    // Budget reporting: positive when fresh, decreasing under squaring.
    let ct = ctx.encrypt_slots(&pk, &vec![1; l], &mut rng)?;
    let fresh = ctx.noise_budget(&ct);
    let deep = ctx.he_mul(&rlk, &ct, &ct)?;
    ensure!(fresh > 0, "fresh budget positive");
    ensure!(ctx.noise_budget(&deep) <= fresh, "budget non-increasing");
    checks += 2;
    Ok(checks)
}

/// Digit circuits: exhaustive encrypted truth tables, with the
/// measured multiplication count checked against the circuit's own
/// declaration (and against the budget where one is attainable).
fn suite_circuits(cache: &PlanCache) -> Result<u64> {
    let mut checks = 0u64;
    for (preset, seed, check_budget) in [("t3a", 55u64, false), ("t5", 56, true)] {
        let params = CompareParams::preset(preset).ok_or_else(|| anyhow!("preset {preset}"))?;
        let p = params.p;
        let (engine, keys) = setup(params, 1, seed, cache)?;
        let mut rng = SplitRng::from_seed(seed);
        let pairs: Vec<(u64, u64)> =
            (0..p).flat_map(|x| (0..p).map(move |y| (x, y))).collect();
        // One digit per block; chunk when the table outgrows the slots.
        let cap = engine.ints_per_ct(1);
        for chunk in pairs.chunks(cap) {
            let xs: Vec<Vec<u64>> = chunk.iter().map(|&(x, _)| vec![x]).collect();
            let ys: Vec<Vec<u64>> = chunk.iter().map(|&(_, y)| vec![y]).collect();
            let cx =
                engine.encrypt_positions(&keys.pk, &engine.pack_digit_vectors(&xs, 1)?, &mut rng)?;
            let cy =
                engine.encrypt_positions(&keys.pk, &engine.pack_digit_vectors(&ys, 1)?, &mut rng)?;
            let mut counter = OpCounter::new();
            let (lt, eq) = engine.eval_circuit(&cx, &cy, &mut counter)?;
            let lt = engine.read_block_bits(&keys.sk, &lt, 1)?;
            let eq = engine.read_block_bits(&keys.sk, &eq, 1)?;
            for (i, &(x, y)) in chunk.iter().enumerate() {
                ensure!(lt[i] == u64::from(x < y), "LT({x}, {y}) at p = {p}");
                ensure!(eq[i] == u64::from(x == y), "EQ({x}, {y}) at p = {p}");
                checks += 2;
            }
            let declared = engine.circuits().nonscalar_mults() as u64;
            let used = counter.total().nonscalar_mults;
            ensure!(
                used == declared,
                "measured {used} nonscalar mults, circuit declares {declared}"
            );
            if check_budget {
                let budget = engine.circuits().budget() as u64;
                ensure!(used <= budget, "{used} nonscalar mults exceed budget {budget}");
            }
            checks += 1;
        }
    }
    Ok(checks)
}

/// Ciphertext persistence: bit-exact round trip, corruption rejected.
fn suite_serialize(cache: &PlanCache) -> Result<u64> {
    let mut checks = 0u64;
    let params = BgvParams {
        p: 3,
        m: 91,
        levels: 3,
        prime_bits: 45,
    };
    let ctx = BgvContext::new(params, cache)?;
    let mut rng = SplitRng::from_seed(66);
    let (sk, pk) = ctx.keygen(&mut rng);
    let pt: Vec<u64> = (0..ctx.slots()).map(|_| rng.below(3)).collect();
    let ct = ctx.encrypt_slots(&pk, &pt, &mut rng)?;
    let bytes = serialize::ciphertext_to_bytes(&ct);
    let back = serialize::ciphertext_from_bytes(&ctx, &bytes)?;
    ensure!(back == ct, "round trip differs");
    ensure!(ctx.decrypt_slots(&sk, &back)? == pt, "round trip decrypts");
    checks += 2;
    let mut bad = bytes.clone();
    bad[0] ^= 0xFF;
    if serialize::ciphertext_from_bytes(&ctx, &bad).is_ok() {
        bail!("corrupt magic accepted");
    }
    ensure!(
        serialize::ciphertext_from_bytes(&ctx, &bytes[..bytes.len() - 1]).is_err(),
        "truncation accepted"
    );
    checks += 2;
    Ok(checks)
}
