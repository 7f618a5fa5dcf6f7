//! Word-wise homomorphic comparison.
//!
//! Integers are split into digits, one digit per SIMD slot; a fused
//! less-than/equality circuit is evaluated once over all packed digit
//! pairs, and a logarithmic pass of rotations and multiplications
//! combines per-digit bits into per-integer verdicts
//! (most-significant digit wins, ties fall through).
//!
//! The engine pins down one parameter set: the BGV context, the digit
//! circuit pair, the relinearization and rotation keys, and the mapping
//! between *logical positions* (the order digit packing uses) and the
//! ring's native slot order. Logical position `i` lives in the slot
//! whose coset representative is `g^i`, where `g` generates the slot
//! quotient group; one Galois automorphism then shifts every logical
//! position down by a power of two, which is exactly the move the
//! combining pass needs.

pub mod apps;
pub mod circuit;
pub mod exec;
pub mod ints;
pub mod lex;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::bgv::{BgvContext, BgvParams, Ciphertext, GaloisKeys, KswKey, PublicKey, SecretKey};
use crate::error::{Error, Result};
use crate::metrics::{OpCounter, Phase};
use crate::plainspace::PlainSpace;
use crate::rng::SplitRng;
use crate::transform::PlanCache;

pub use circuit::CircuitKind;

use circuit::{CircuitPair, Lin, Src};
use exec::{Executor, PoolExec, SequentialExec};

/// Parameters of a comparison engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompareParams {
    pub p: u64,
    pub m: u64,
    pub levels: usize,
    pub prime_bits: u32,
    pub kind: CircuitKind,
}

impl CompareParams {
    /// Named toy parameter sets used throughout the tests and CLI.
    pub fn preset(name: &str) -> Option<Self> {
        let (p, m, levels, prime_bits, kind) = match name {
            "t3a" => (3, 91, 10, 45, CircuitKind::Bivariate),
            "t3b" => (3, 121, 16, 45, CircuitKind::Bivariate),
            "t5" => (5, 31, 40, 45, CircuitKind::Bivariate),
            "t7" => (7, 171, 16, 50, CircuitKind::Bivariate),
            "t11" => (11, 133, 16, 50, CircuitKind::Bivariate),
            "t13" => (13, 255, 16, 50, CircuitKind::Bivariate),
            "t17" => (17, 257, 22, 50, CircuitKind::Univariate),
            "t17b" => (17, 771, 16, 59, CircuitKind::Univariate),
            _ => return None,
        };
        Some(Self {
            p,
            m,
            levels,
            prime_bits,
            kind,
        })
    }

    /// All preset names, in a stable order.
    pub fn preset_names() -> &'static [&'static str] {
        &["t3a", "t3b", "t5", "t7", "t11", "t13", "t17", "t17b"]
    }

    fn bgv(&self) -> BgvParams {
        BgvParams {
            p: self.p,
            m: self.m,
            levels: self.levels,
            prime_bits: self.prime_bits,
        }
    }
}

/// Client-side key material.
pub struct ClientKeys {
    pub sk: SecretKey,
    pub pk: PublicKey,
}

/// Mapping between logical positions and native slot order.
#[derive(Debug, Clone)]
pub struct SlotLayout {
    g: u64,
    pos_to_slot: Vec<usize>,
    slot_to_pos: Vec<usize>,
}

impl SlotLayout {
    /// Builds the layout by walking the generator's orbit; fails when
    /// the slot quotient group is not cyclic (no single generator, so
    /// no rotation ladder).
    pub fn build(plain: &PlainSpace) -> Result<Self> {
        let g = plain.quotient_generator().ok_or_else(|| {
            Error::InvalidParams(format!(
                "slot quotient for p={} m={} is not cyclic; rotations unavailable",
                plain.p(),
                plain.m()
            ))
        })?;
        let l = plain.slots();
        let map = plain.galois_slot_map(g)?;
        let mut pos_to_slot = vec![usize::MAX; l];
        let mut slot_to_pos = vec![usize::MAX; l];
        // Slot 0 holds coset representative 1 = g^0.
        let mut slot = 0usize;
        pos_to_slot[0] = 0;
        slot_to_pos[0] = 0;
        for pos in 1..l {
            // Applying the g-automorphism pulls content from `src` into
            // `slot`, so `src` sits one logical position above `slot`.
            let (src, _frob) = map[slot];
            if slot_to_pos[src] != usize::MAX {
                return Err(Error::InvalidParams(
                    "generator orbit closed early; slot walk is not a full cycle".into(),
                ));
            }
            pos_to_slot[pos] = src;
            slot_to_pos[src] = pos;
            slot = src;
        }
        Ok(Self {
            g,
            pos_to_slot,
            slot_to_pos,
        })
    }

    /// The quotient generator.
    pub fn generator(&self) -> u64 {
        self.g
    }

    /// Number of logical positions (= slots).
    pub fn positions(&self) -> usize {
        self.pos_to_slot.len()
    }

    /// Reorders per-position values into per-slot values.
    pub fn positions_to_slots(&self, by_pos: &[u64]) -> Result<Vec<u64>> {
        if by_pos.len() != self.pos_to_slot.len() {
            return Err(Error::BadLength {
                expected: self.pos_to_slot.len(),
                got: by_pos.len(),
                context: "per-position vector",
            });
        }
        let mut out = vec![0u64; by_pos.len()];
        for (pos, &v) in by_pos.iter().enumerate() {
            out[self.pos_to_slot[pos]] = v;
        }
        Ok(out)
    }

    /// Reorders per-slot values into per-position values.
    pub fn slots_to_positions(&self, by_slot: &[u64]) -> Result<Vec<u64>> {
        if by_slot.len() != self.slot_to_pos.len() {
            return Err(Error::BadLength {
                expected: self.slot_to_pos.len(),
                got: by_slot.len(),
                context: "per-slot vector",
            });
        }
        let mut out = vec![0u64; by_slot.len()];
        for (slot, &v) in by_slot.iter().enumerate() {
            out[self.slot_to_pos[slot]] = v;
        }
        Ok(out)
    }
}

/// Evaluator-side comparison engine.
pub struct CompareEngine {
    ctx: Arc<BgvContext>,
    params: CompareParams,
    circuits: CircuitPair,
    rlk: KswKey,
    gkeys: Option<GaloisKeys>,
    layout: Option<SlotLayout>,
    /// Galois element for each power-of-two logical shift.
    rot_elements: Vec<u64>,
    exec: Arc<dyn Executor>,
    const_cache: Mutex<HashMap<u64, Arc<Vec<u64>>>>,
}

/// Builds the full system: context, keys, layout, executor.
pub fn setup(
    params: CompareParams,
    workers: usize,
    seed: u64,
    cache: &PlanCache,
) -> Result<(Arc<CompareEngine>, ClientKeys)> {
    let ctx = BgvContext::new(params.bgv(), cache)?;
    let circuits = CircuitPair::build(params.p, params.kind)?;
    let mut rng = SplitRng::from_seed(seed);
    let (sk, pk) = ctx.keygen(&mut rng);
    let rlk = ctx.gen_relin_key(&sk, &mut rng);
    // Rotation ladder if the quotient is cyclic.
    let (layout, gkeys, rot_elements) = match SlotLayout::build(ctx.plain()) {
        Ok(layout) => {
            let l = layout.positions();
            let mut elements = Vec::new();
            let mut shift = 1usize;
            let md_m = params.m;
            while shift < l.max(2) {
                elements.push(pow_mod(layout.generator(), shift as u64, md_m));
                shift <<= 1;
            }
            if elements.is_empty() {
                elements.push(1);
            }
            let unique: Vec<u64> = {
                let mut u = elements.clone();
                u.sort_unstable();
                u.dedup();
                u
            };
            let gk = ctx.gen_galois_keys(&sk, &unique, &mut rng)?;
            (Some(layout), Some(gk), elements)
        }
        Err(_) => (None, None, Vec::new()),
    };
    let exec: Arc<dyn Executor> = if workers <= 1 {
        Arc::new(SequentialExec)
    } else {
        Arc::new(PoolExec::new(workers))
    };
    let engine = CompareEngine {
        ctx,
        params,
        circuits,
        rlk,
        gkeys,
        layout,
        rot_elements,
        exec,
        const_cache: Mutex::new(HashMap::new()),
    };
    Ok((Arc::new(engine), ClientKeys { sk, pk }))
}

fn pow_mod(base: u64, exp: u64, m: u64) -> u64 {
    let mut acc: u128 = 1;
    let mut b: u128 = (base % m) as u128;
    let mut e = exp;
    let m = m as u128;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    acc as u64
}

impl CompareEngine {
    pub fn ctx(&self) -> &Arc<BgvContext> {
        &self.ctx
    }

    pub fn params(&self) -> &CompareParams {
        &self.params
    }

    pub fn circuits(&self) -> &CircuitPair {
        &self.circuits
    }

    pub fn relin_key(&self) -> &KswKey {
        &self.rlk
    }

    /// Digit alphabet size for this engine's circuit kind.
    pub fn alphabet(&self) -> u64 {
        self.circuits.alphabet
    }

    /// The slot layout; error when rotations are unavailable.
    pub fn layout(&self) -> Result<&SlotLayout> {
        self.layout.as_ref().ok_or(Error::InvalidParams(
            "this parameter set has no cyclic slot quotient; packing and \
             combining need rotations"
                .into(),
        ))
    }

    /// Number of logical positions (slots).
    pub fn positions(&self) -> usize {
        self.ctx.slots()
    }

    pub fn executor(&self) -> &Arc<dyn Executor> {
        &self.exec
    }

    /// Encodes a constant broadcast across all slots (cached).
    pub fn const_poly(&self, c: u64) -> Result<Arc<Vec<u64>>> {
        let c = c % self.params.p;
        if let Some(hit) = self.const_cache.lock().expect("const cache").get(&c) {
            return Ok(Arc::clone(hit));
        }
        let poly = Arc::new(
            self.ctx
                .plain()
                .encode_scalars(&vec![c; self.ctx.slots()])?,
        );
        self.const_cache
            .lock()
            .expect("const cache")
            .insert(c, Arc::clone(&poly));
        Ok(poly)
    }

    /// Encodes a per-position mask/value vector into a plaintext poly.
    pub fn position_poly(&self, by_pos: &[u64]) -> Result<Vec<u64>> {
        let by_slot = self.layout()?.positions_to_slots(by_pos)?;
        self.ctx.plain().encode_scalars(&by_slot)
    }

    /// Encrypts a per-position value vector.
    pub fn encrypt_positions(
        &self,
        pk: &PublicKey,
        by_pos: &[u64],
        rng: &mut SplitRng,
    ) -> Result<Ciphertext> {
        let poly = self.position_poly(by_pos)?;
        self.ctx.encrypt(pk, &poly, rng)
    }

    /// Decrypts into per-position values.
    pub fn decrypt_positions(&self, sk: &SecretKey, ct: &Ciphertext) -> Result<Vec<u64>> {
        let by_slot = self.ctx.decrypt_slots(sk, ct)?;
        self.layout()?.slots_to_positions(&by_slot)
    }

    /// Switches a copy of `ct` down to `level`.
    fn at_level(&self, ct: &Ciphertext, level: usize) -> Result<Ciphertext> {
        if ct.level() < level {
            return Err(Error::LevelMismatch {
                left: ct.level(),
                right: level,
            });
        }
        let mut cur = ct.clone();
        while cur.level() > level {
            cur = self.ctx.mod_switch(&cur)?;
        }
        Ok(cur)
    }

    /// Rotates logical positions down by `r`: position `i` receives the
    /// content of position `i + r` (mod the position count).
    pub fn rotate_logical(
        &self,
        ct: &Ciphertext,
        r: usize,
        counter: &mut OpCounter,
        phase: Phase,
    ) -> Result<Ciphertext> {
        let gk = self.gkeys.as_ref().ok_or(Error::InvalidParams(
            "rotation keys were not generated for this parameter set".into(),
        ))?;
        let l = self.positions();
        let mut r = r % l;
        let mut cur = ct.clone();
        let mut j = 0usize;
        while r > 0 {
            if r & 1 == 1 {
                cur = self.ctx.apply_galois(gk, &cur, self.rot_elements[j])?;
                counter.count_rotation(phase, 1);
            }
            r >>= 1;
            j += 1;
        }
        Ok(cur)
    }

    /// Evaluates one linear form over encrypted inputs/registers at the
    /// given level.
    fn eval_lin_ct(
        &self,
        lin: &Lin,
        x: &Ciphertext,
        y: &Ciphertext,
        regs: &[Ciphertext],
        level: usize,
        counter: &mut OpCounter,
        phase: Phase,
    ) -> Result<Ciphertext> {
        let mut acc: Option<Ciphertext> = None;
        for &(coef, src) in &lin.terms {
            let base = match src {
                Src::X => x,
                Src::Y => y,
                Src::Reg(i) => &regs[i],
            };
            let mut t = self.at_level(base, level)?;
            if coef != 1 {
                t = self.ctx.mul_scalar(&t, coef);
                counter.count_scalar(phase, 1);
            }
            acc = Some(match acc {
                None => t,
                Some(a) => {
                    counter.count_add(phase, 1);
                    self.ctx.add(&a, &t)?
                }
            });
        }
        let c = lin.constant % self.params.p;
        match (acc, c) {
            (Some(a), 0) => Ok(a),
            (Some(a), c) => {
                counter.count_add(phase, 1);
                self.ctx.add_plain(&a, &self.const_poly(c)?)
            }
            (None, c) => self.ctx.trivial(&self.const_poly(c)?, level),
        }
    }

    /// Lowest level among the sources a set of linear forms reads.
    fn forms_level(
        &self,
        lins: &[&Lin],
        x: &Ciphertext,
        y: &Ciphertext,
        regs: &[Ciphertext],
    ) -> usize {
        let mut level = usize::MAX;
        for lin in lins {
            for &(_, src) in &lin.terms {
                let l = match src {
                    Src::X => x.level(),
                    Src::Y => y.level(),
                    Src::Reg(i) => regs[i].level(),
                };
                level = level.min(l);
            }
        }
        if level == usize::MAX {
            x.level().min(y.level())
        } else {
            level
        }
    }

    /// Runs the fused digit circuit on two slot-packed digit
    /// ciphertexts, returning per-slot `(lt, eq)` bit ciphertexts.
    pub fn eval_circuit(
        &self,
        x: &Ciphertext,
        y: &Ciphertext,
        counter: &mut OpCounter,
    ) -> Result<(Ciphertext, Ciphertext)> {
        let slp = &self.circuits.slp;
        let mut regs: Vec<Ciphertext> = Vec::with_capacity(slp.steps.len());
        for step in &slp.steps {
            let level = self.forms_level(&[&step.lhs, &step.rhs], x, y, &regs);
            let a = self.eval_lin_ct(&step.lhs, x, y, &regs, level, counter, Phase::Extraction)?;
            let b = self.eval_lin_ct(&step.rhs, x, y, &regs, level, counter, Phase::Extraction)?;
            counter.count_nonscalar(Phase::Extraction, 1);
            regs.push(
                self.ctx
                    .he_mul(&self.rlk, &a, &b)
                    .map_err(|e| Error::ComparisonFailed { source: Box::new(e) })?,
            );
        }
        let out_level = self.forms_level(
            &[&slp.outputs[0], &slp.outputs[1]],
            x,
            y,
            &regs,
        );
        let lt = self.eval_lin_ct(&slp.outputs[0], x, y, &regs, out_level, counter, Phase::LtEq)?;
        let eq = self.eval_lin_ct(&slp.outputs[1], x, y, &regs, out_level, counter, Phase::LtEq)?;
        Ok((lt, eq))
    }

    /// Multiplies by a per-position 0/1 mask (scalar cost only).
    pub fn mask_positions(
        &self,
        ct: &Ciphertext,
        mask: &[u64],
        counter: &mut OpCounter,
        phase: Phase,
    ) -> Result<Ciphertext> {
        let poly = self.position_poly(mask)?;
        counter.count_scalar(phase, 1);
        self.ctx.mul_plain(ct, &poly)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn engine(name: &str, seed: u64) -> (Arc<CompareEngine>, ClientKeys) {
        let cache = PlanCache::new();
        let params = CompareParams::preset(name).unwrap();
        setup(params, 1, seed, &cache).unwrap()
    }

    #[test]
    fn presets_resolve() {
        for name in CompareParams::preset_names() {
            assert!(CompareParams::preset(name).is_some(), "{name}");
        }
        assert!(CompareParams::preset("nope").is_none());
    }

    #[test]
    fn layout_is_a_bijection_and_round_trips() {
        let (eng, _) = engine("t3a", 11);
        let layout = eng.layout().unwrap();
        let l = layout.positions();
        assert_eq!(l, eng.positions());
        let vals: Vec<u64> = (0..l as u64).collect();
        let slots = layout.positions_to_slots(&vals).unwrap();
        let back = layout.slots_to_positions(&slots).unwrap();
        assert_eq!(back, vals);
        let mut seen = vec![false; l];
        for pos in 0..l {
            let s = layout.pos_to_slot[pos];
            assert!(!seen[s]);
            seen[s] = true;
        }
    }

    #[test]
    fn rotation_shifts_logical_positions() {
        let (eng, keys) = engine("t3a", 42);
        let l = eng.positions();
        let mut rng = SplitRng::from_seed(999);
        let vals: Vec<u64> = (0..l).map(|i| (i as u64) % 3).collect();
        let ct = eng.encrypt_positions(&keys.pk, &vals, &mut rng).unwrap();
        let mut counter = OpCounter::new();
        for r in [1usize, 2, 3, 5, l - 1] {
            let rot = eng
                .rotate_logical(&ct, r, &mut counter, Phase::ShiftMul)
                .unwrap();
            let got = eng.decrypt_positions(&keys.sk, &rot).unwrap();
            let want: Vec<u64> = (0..l).map(|i| vals[(i + r) % l]).collect();
            assert_eq!(got, want, "r = {r}");
        }
        assert!(counter.total().rotations > 0);
    }

    #[test]
    fn encrypted_circuit_matches_plaintext_on_packed_digits() {
        let (eng, keys) = engine("t3a", 7);
        let l = eng.positions();
        let alphabet = eng.alphabet();
        let mut rng = SplitRng::from_seed(5151);
        let xs: Vec<u64> = (0..l).map(|_| rng.below(alphabet)).collect();
        let ys: Vec<u64> = (0..l).map(|_| rng.below(alphabet)).collect();
        let cx = eng.encrypt_positions(&keys.pk, &xs, &mut rng).unwrap();
        let cy = eng.encrypt_positions(&keys.pk, &ys, &mut rng).unwrap();
        let mut counter = OpCounter::new();
        let (lt, eq) = eng.eval_circuit(&cx, &cy, &mut counter).unwrap();
        let lt_bits = eng.decrypt_positions(&keys.sk, &lt).unwrap();
        let eq_bits = eng.decrypt_positions(&keys.sk, &eq).unwrap();
        for i in 0..l {
            assert_eq!(lt_bits[i], u64::from(xs[i] < ys[i]), "slot {i}");
            assert_eq!(eq_bits[i], u64::from(xs[i] == ys[i]), "slot {i}");
        }
        assert_eq!(
            counter.total().nonscalar_mults,
            eng.circuits().nonscalar_mults() as u64
        );
    }

    #[test]
    fn non_cyclic_sets_report_missing_rotations() {
        let cache = PlanCache::new();
        let params = CompareParams::preset("t13").unwrap();
        let (eng, _) = setup(params, 1, 3, &cache).unwrap();
        assert!(eng.layout().is_err());
    }

    #[test]
    fn mask_positions_zeroes_selected_entries() {
        let (eng, keys) = engine("t3a", 13);
        let l = eng.positions();
        let mut rng = SplitRng::from_seed(77);
        let vals: Vec<u64> = (0..l).map(|_| rng.below(3)).collect();
        let ct = eng.encrypt_positions(&keys.pk, &vals, &mut rng).unwrap();
        let mask: Vec<u64> = (0..l).map(|i| (i % 2) as u64).collect();
        let mut counter = OpCounter::new();
        let masked = eng
            .mask_positions(&ct, &mask, &mut counter, Phase::ShiftMul)
            .unwrap();
        let got = eng.decrypt_positions(&keys.sk, &masked).unwrap();
        for i in 0..l {
            assert_eq!(got[i], vals[i] * mask[i]);
        }
    }
}
