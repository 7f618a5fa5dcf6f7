//! Scratch probe (not part of the suite): prints noise-bound growth
//! through the tournament rounds.

use ufhe::compare::ints::digits_for_bits;
use ufhe::compare::{setup, CompareParams};
use ufhe::metrics::{OpCounter, Phase};
use ufhe::rng::SplitRng;
use ufhe::transform::global_plan_cache;

#[test]
#[ignore]
fn probe_min_rounds() {
    let params = CompareParams::preset("t5").unwrap();
    let (eng, keys) = setup(params, 1, 2024, global_plan_cache()).unwrap();
    let mut rng = SplitRng::from_seed(909);
    let k = digits_for_bits(eng.alphabet(), 16);
    println!("k = {k}, levels = {}", eng.ctx().max_levels());
    let vals: Vec<u64> = (0..16).map(|_| rng.below(1 << 16)).collect();
    let mut layer: Vec<_> = vals
        .iter()
        .map(|&v| eng.encrypt_ints(&keys.pk, &[v], k, &mut rng).unwrap())
        .collect();
    println!(
        "fresh: level {} bound_bits {}",
        layer[0].level(),
        layer[0].noise_bound().bits()
    );
    let ctx = eng.ctx();
    let rlk = eng.relin_key();
    let mut round = 0;
    while layer.len() > 1 {
        round += 1;
        let mut next = Vec::new();
        for pair in layer.chunks(2) {
            let mut counter = OpCounter::new();
            let (a, b) = ctx.align_levels(&pair[0], &pair[1]).unwrap();
            let v = eng.compare_packed(&a, &b, k, &mut counter).unwrap();
            println!(
                "  round {round}: verdict level {} bound_bits {}",
                v.lt.level(),
                v.lt.noise_bound().bits()
            );
            let bit = eng.broadcast_base(&v.lt, k, &mut counter).unwrap();
            println!(
                "  round {round}: bit     level {} bound_bits {}",
                bit.level(),
                bit.noise_bound().bits()
            );
            let diff = ctx.sub(&a, &b).unwrap();
            let (diff, bit2) = ctx.align_levels(&diff, &bit).unwrap();
            println!(
                "  round {round}: diff    level {} bound_bits {}",
                diff.level(),
                diff.noise_bound().bits()
            );
            let mut c2 = OpCounter::new();
            c2.count_nonscalar(Phase::LtEq, 1);
            let sel = ctx.he_mul(rlk, &diff, &bit2).unwrap();
            let (bb, sel2) = ctx.align_levels(&b, &sel).unwrap();
            let win = ctx.add(&bb, &sel2).unwrap();
            println!(
                "  round {round}: winner  level {} bound_bits {} (budget {})",
                win.level(),
                win.noise_bound().bits(),
                ctx.noise_budget(&win)
            );
            next.push(win);
        }
        layer = next;
    }
}
