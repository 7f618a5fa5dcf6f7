//! Slot-usage tracking and compaction of sparsely used ciphertexts.
//!
//! Homomorphic pipelines often leave most slot positions carrying
//! nothing useful (reduction patterns, strided layouts). The runtime
//! cannot see which slots matter, so usefulness is declared and tracked
//! alongside each ciphertext as a boolean mask over logical positions.
//! Before an expensive stage, sparsely used ciphertexts are compacted:
//! useful values are gathered left-to-right into the minimum number of
//! ciphertexts via mask-multiply, rotate, add — grouping moves that
//! share a rotation offset so each offset is paid once.

use crate::bgv::Ciphertext;
use crate::compare::CompareEngine;
use crate::error::{Error, Result};
use crate::metrics::{OpCounter, Phase};

/// Declared usefulness of each logical position of one ciphertext.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotUsage {
    mask: Vec<bool>,
    provenance: String,
}

impl SlotUsage {
    /// Usage from an explicit mask.
    pub fn from_mask(mask: Vec<bool>, provenance: impl Into<String>) -> Self {
        Self {
            mask,
            provenance: provenance.into(),
        }
    }

    /// The mask over logical positions.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Tag of the operation that last wrote this ciphertext.
    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Number of useful positions.
    pub fn useful(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Fraction of positions carrying useful data.
    pub fn utilization(&self) -> f64 {
        if self.mask.is_empty() {
            0.0
        } else {
            self.useful() as f64 / self.mask.len() as f64
        }
    }
}

/// The operation whose effect on usefulness is being tracked.
#[derive(Debug, Clone, Copy)]
pub enum TrackOp {
    /// Slotwise addition: a position is useful if any input says so.
    Add,
    /// Slotwise multiplication: same conservative rule as addition.
    Mul,
    /// Downward rotation by the given amount (position `i` receives
    /// the content of `i + r`).
    Rotate(usize),
    /// Fresh encode of this many values into the leading positions.
    Encode(usize),
}

/// Propagates usage through one operation. `meta` becomes the new
/// provenance tag.
pub fn track(op: TrackOp, inputs: &[&SlotUsage], meta: &str) -> Result<SlotUsage> {
    match op {
        TrackOp::Add | TrackOp::Mul => {
            let first = inputs.first().ok_or(Error::BadLength {
                expected: 1,
                got: 0,
                context: "usage inputs for add/mul",
            })?;
            let l = first.mask.len();
            let mut mask = vec![false; l];
            for u in inputs {
                if u.mask.len() != l {
                    return Err(Error::LengthMismatch {
                        left: l,
                        right: u.mask.len(),
                        context: "usage masks",
                    });
                }
                for (m, &b) in mask.iter_mut().zip(&u.mask) {
                    *m |= b;
                }
            }
            Ok(SlotUsage::from_mask(mask, meta))
        }
        TrackOp::Rotate(r) => {
            let [input] = inputs else {
                return Err(Error::BadLength {
                    expected: 1,
                    got: inputs.len(),
                    context: "usage inputs for rotate",
                });
            };
            let l = input.mask.len();
            let mask = (0..l).map(|i| input.mask[(i + r) % l]).collect();
            Ok(SlotUsage::from_mask(mask, meta))
        }
        TrackOp::Encode(count) => {
            let [input] = inputs else {
                return Err(Error::BadLength {
                    expected: 1,
                    got: inputs.len(),
                    context: "usage inputs for encode (pass the layout width)",
                });
            };
            let l = input.mask.len();
            if count > l {
                return Err(Error::CapacityExceeded {
                    context: "encoded values per ciphertext",
                    needed: count,
                    available: l,
                });
            }
            let mask = (0..l).map(|i| i < count).collect();
            Ok(SlotUsage::from_mask(mask, meta))
        }
    }
}

/// Convenience: a fresh encode mask of `count` values in `l` positions.
pub fn encode_usage(count: usize, l: usize, meta: &str) -> Result<SlotUsage> {
    let width = SlotUsage::from_mask(vec![false; l], "layout");
    track(TrackOp::Encode(count), &[&width], meta)
}

/// One slot move of a compaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Move {
    pub src_ct: usize,
    pub src_pos: usize,
    pub dst_ct: usize,
    pub dst_pos: usize,
}

/// A gather of all useful slots into the minimum ciphertext count.
#[derive(Debug, Clone)]
pub struct CompactionPlan {
    moves: Vec<Move>,
    src_count: usize,
    dst_count: usize,
    positions: usize,
    total_useful: usize,
}

impl CompactionPlan {
    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    pub fn src_count(&self) -> usize {
        self.src_count
    }

    pub fn dst_count(&self) -> usize {
        self.dst_count
    }

    pub fn total_useful(&self) -> usize {
        self.total_useful
    }

    /// True when every move keeps its slot where it is and no
    /// ciphertext is dropped, so applying would be a no-op.
    pub fn is_identity(&self) -> bool {
        self.dst_count == self.src_count
            && self
                .moves
                .iter()
                .all(|m| m.src_ct == m.dst_ct && m.src_pos == m.dst_pos)
    }

    /// Distinct (source, destination, rotation offset) groups; each
    /// costs one mask (and one rotation when the offset is nonzero).
    pub fn rotation_buckets(&self) -> Vec<(usize, usize, usize)> {
        let mut buckets: Vec<(usize, usize, usize)> = self
            .moves
            .iter()
            .map(|m| {
                let off = (m.src_pos + self.positions - m.dst_pos) % self.positions;
                (m.src_ct, m.dst_ct, off)
            })
            .collect();
        buckets.sort_unstable();
        buckets.dedup();
        buckets
    }
}

/// Plans a greedy left-to-right gather of every useful slot into
/// `ceil(total_useful / positions)` ciphertexts, preserving scan order.
pub fn plan_compaction(usages: &[SlotUsage]) -> Result<CompactionPlan> {
    let first = usages.first().ok_or(Error::BadLength {
        expected: 1,
        got: 0,
        context: "usages to compact",
    })?;
    let l = first.mask.len();
    let mut moves = Vec::new();
    let mut next = 0usize;
    for (src_ct, u) in usages.iter().enumerate() {
        if u.mask.len() != l {
            return Err(Error::LengthMismatch {
                left: l,
                right: u.mask.len(),
                context: "usage masks",
            });
        }
        for (src_pos, &useful) in u.mask.iter().enumerate() {
            if useful {
                moves.push(Move {
                    src_ct,
                    src_pos,
                    dst_ct: next / l,
                    dst_pos: next % l,
                });
                next += 1;
            }
        }
    }
    Ok(CompactionPlan {
        moves,
        src_count: usages.len(),
        dst_count: next.div_ceil(l),
        positions: l,
        total_useful: next,
    })
}

/// Whether applying `plan` is worthwhile: it must shrink the ciphertext
/// count, every input must keep one level of switching headroom, and
/// the masked, rotated, merged copies must stay under the decryption
/// threshold — checked against the tracked bounds.
pub fn should_compact(engine: &CompareEngine, cts: &[Ciphertext], plan: &CompactionPlan) -> bool {
    if plan.dst_count() >= plan.src_count() {
        return false;
    }
    let ctx = engine.ctx();
    cts.iter().all(|ct| {
        if ct.level() == 0 {
            // Keep one plaintext-multiply level in reserve.
            return false;
        }
        let after_mask = ct.noise_bound()
            * ctx.ring_expansion()
            * num_bigint::BigUint::from((ctx.params().p - 1) / 2 + 1);
        let budget_left = ctx.threshold(ct.level());
        after_mask * 16u32 * num_bigint::BigUint::from(plan.moves().len().max(1)) < budget_left
    })
}

/// Realizes a compaction homomorphically: per rotation bucket, mask the
/// contributing source positions, rotate once, and add into the
/// destination accumulator. Returns `dst_count` ciphertexts; an
/// identity plan returns the inputs untouched.
pub fn apply_compaction(
    engine: &CompareEngine,
    cts: &[Ciphertext],
    plan: &CompactionPlan,
    counter: &mut OpCounter,
) -> Result<Vec<Ciphertext>> {
    if cts.len() != plan.src_count() {
        return Err(Error::LengthMismatch {
            left: cts.len(),
            right: plan.src_count(),
            context: "ciphertexts vs compaction plan",
        });
    }
    if plan.is_identity() {
        return Ok(cts.to_vec());
    }
    let l = engine.positions();
    let ctx = engine.ctx();
    let mut out: Vec<Option<Ciphertext>> = vec![None; plan.dst_count()];
    for (src_ct, dst_ct, off) in plan.rotation_buckets() {
        let mut mask = vec![0u64; l];
        for m in plan.moves() {
            let this = (m.src_pos + l - m.dst_pos) % l;
            if m.src_ct == src_ct && m.dst_ct == dst_ct && this == off {
                mask[m.src_pos] = 1;
            }
        }
        let mut piece = engine.mask_positions(&cts[src_ct], &mask, counter, Phase::ShiftMul)?;
        if off != 0 {
            piece = engine.rotate_logical(&piece, off, counter, Phase::ShiftMul)?;
        }
        out[dst_ct] = Some(match out[dst_ct].take() {
            None => piece,
            Some(acc) => {
                let (a, b) = ctx.align_levels(&acc, &piece)?;
                counter.count_add(Phase::ShiftAdd, 1);
                ctx.add(&a, &b)?
            }
        });
    }
    Ok(out
        .into_iter()
        .map(|o| o.expect("every destination receives at least one bucket"))
        .collect())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::compare::{setup, ClientKeys, CompareParams};
    use crate::rng::SplitRng;
    use crate::transform::PlanCache;

    fn engine() -> (Arc<CompareEngine>, ClientKeys) {
        let cache = PlanCache::new();
        setup(CompareParams::preset("t3a").unwrap(), 1, 5150, &cache).unwrap()
    }

    fn mask_of(bits: &[u8]) -> SlotUsage {
        SlotUsage::from_mask(bits.iter().map(|&b| b != 0).collect(), "test")
    }

    #[test]
    fn tracking_or_rotate_and_encode() {
        let a = mask_of(&[1, 0, 0, 1]);
        let b = mask_of(&[0, 1, 0, 1]);
        let sum = track(TrackOp::Add, &[&a, &b], "sum").unwrap();
        assert_eq!(sum.mask(), &[true, true, false, true]);
        assert_eq!(sum.provenance(), "sum");
        let prod = track(TrackOp::Mul, &[&a, &b], "prod").unwrap();
        assert_eq!(prod.mask(), sum.mask());

        // Rotate by k then by l - k restores the mask.
        let r = track(TrackOp::Rotate(3), &[&a], "rot").unwrap();
        let back = track(TrackOp::Rotate(1), &[&r], "rot").unwrap();
        assert_eq!(back.mask(), a.mask());

        let enc = encode_usage(4, 12, "enc").unwrap();
        assert_eq!(enc.useful(), 4);
        assert_eq!(enc.mask()[..4], [true; 4]);
        assert!(!enc.mask()[4..].iter().any(|&b| b));
        assert!((enc.utilization() - 1.0 / 3.0).abs() < 1e-12);

        let short = mask_of(&[1, 0]);
        assert!(matches!(
            track(TrackOp::Add, &[&a, &short], "bad"),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn tracked_rotation_matches_homomorphic_rotation() {
        let (eng, keys) = engine();
        let l = eng.positions();
        let mut rng = SplitRng::from_seed(4);
        let mut vals = vec![0u64; l];
        let mut mask = vec![false; l];
        for i in (0..l).step_by(3) {
            vals[i] = 1 + rng.below(2);
            mask[i] = true;
        }
        let usage = SlotUsage::from_mask(mask, "stride");
        let ct = eng.encrypt_positions(&keys.pk, &vals, &mut rng).unwrap();
        let mut counter = OpCounter::new();
        let rot = eng
            .rotate_logical(&ct, 5, &mut counter, Phase::ShiftMul)
            .unwrap();
        let rot_usage = track(TrackOp::Rotate(5), &[&usage], "rot").unwrap();
        let got = eng.decrypt_positions(&keys.sk, &rot).unwrap();
        for i in 0..l {
            if rot_usage.mask()[i] {
                assert_eq!(got[i], vals[(i + 5) % l]);
            } else {
                assert_eq!(got[i], 0);
            }
        }
    }

    #[test]
    fn planning_identity_quarters_and_ceiling() {
        let l = 12usize;
        // Full masks: identity, nothing to gain.
        let full = vec![SlotUsage::from_mask(vec![true; l], "full"); 3];
        let plan = plan_compaction(&full).unwrap();
        assert!(plan.is_identity());
        assert_eq!(plan.dst_count(), 3);

        // Four ciphertexts, every fourth slot useful: one output.
        let quarter = SlotUsage::from_mask((0..l).map(|i| i % 4 == 0).collect(), "stride4");
        assert!((quarter.utilization() - 0.25).abs() < 1e-12);
        let plan = plan_compaction(&vec![quarter; 4]).unwrap();
        assert_eq!(plan.dst_count(), 1);
        assert_eq!(plan.total_useful(), l);
        // Destinations are injective and cover each useful source once.
        let mut seen = vec![false; l];
        for m in plan.moves() {
            assert_eq!(m.dst_ct, 0);
            assert!(!seen[m.dst_pos]);
            seen[m.dst_pos] = true;
        }
        assert!(seen.iter().all(|&b| b));

        // l + 1 useful slots force a second output.
        let full_one = SlotUsage::from_mask(vec![true; l], "full");
        let single =
            SlotUsage::from_mask((0..l).map(|i| i == 7).collect(), "one");
        let plan = plan_compaction(&[full_one, single]).unwrap();
        assert_eq!(plan.dst_count(), 2);
    }

    #[test]
    fn quarters_compact_into_one_ciphertext() {
        let (eng, keys) = engine();
        let l = eng.positions();
        let mut rng = SplitRng::from_seed(271);
        let mut cts = Vec::new();
        let mut usages = Vec::new();
        let mut expected = Vec::new();
        for _ in 0..4 {
            let mut vals = vec![0u64; l];
            let mut mask = vec![false; l];
            for i in (0..l).step_by(4) {
                vals[i] = 1 + rng.below(2);
                mask[i] = true;
                expected.push(vals[i]);
            }
            cts.push(eng.encrypt_positions(&keys.pk, &vals, &mut rng).unwrap());
            usages.push(SlotUsage::from_mask(mask, "stride4"));
        }
        let plan = plan_compaction(&usages).unwrap();
        assert_eq!(plan.dst_count(), 1);
        assert!(should_compact(&eng, &cts, &plan));
        let mut counter = OpCounter::new();
        let out = apply_compaction(&eng, &cts, &plan, &mut counter).unwrap();
        assert_eq!(out.len(), 1);
        let got = eng.decrypt_positions(&keys.sk, &out[0]).unwrap();
        assert_eq!(got, expected);
        assert_eq!(counter.total().nonscalar_mults, 0, "masks and adds only");
    }

    #[test]
    fn random_masks_preserve_scan_order_and_hit_ceiling() {
        let (eng, keys) = engine();
        let l = eng.positions();
        let mut rng = SplitRng::from_seed(1618);
        for trial in 0..3 {
            let src_count = 3 + trial % 2;
            let mut cts = Vec::new();
            let mut usages = Vec::new();
            let mut expected = Vec::new();
            for _ in 0..src_count {
                let mut vals = vec![0u64; l];
                let mut mask = vec![false; l];
                for i in 0..l {
                    if rng.below(3) == 0 {
                        vals[i] = 1 + rng.below(2);
                        mask[i] = true;
                        expected.push(vals[i]);
                    } else if rng.below(2) == 0 {
                        // Junk in a useless slot must not leak through.
                        vals[i] = rng.below(3);
                    }
                }
                cts.push(eng.encrypt_positions(&keys.pk, &vals, &mut rng).unwrap());
                usages.push(SlotUsage::from_mask(mask, "rand"));
            }
            let plan = plan_compaction(&usages).unwrap();
            assert_eq!(plan.dst_count(), expected.len().div_ceil(l));
            let u: f64 = expected.len() as f64 / (src_count * l) as f64;
            assert!(
                plan.dst_count() as f64 / src_count as f64 <= u + 1.0 / src_count as f64 + 1e-9,
                "within one ciphertext of optimal"
            );
            let mut counter = OpCounter::new();
            let out = apply_compaction(&eng, &cts, &plan, &mut counter).unwrap();
            let mut got = Vec::new();
            for (i, ct) in out.iter().enumerate() {
                let vals = eng.decrypt_positions(&keys.sk, ct).unwrap();
                let take = if i + 1 == out.len() && expected.len() % l != 0 {
                    expected.len() % l
                } else {
                    l
                };
                got.extend_from_slice(&vals[..take]);
            }
            assert_eq!(got, expected, "trial {trial}");
        }
    }

    #[test]
    fn identity_plans_and_poor_candidates_are_skipped() {
        let (eng, keys) = engine();
        let l = eng.positions();
        let mut rng = SplitRng::from_seed(33);
        let vals: Vec<u64> = (0..l).map(|_| rng.below(3)).collect();
        let ct = eng.encrypt_positions(&keys.pk, &vals, &mut rng).unwrap();
        let full = SlotUsage::from_mask(vec![true; l], "full");
        let plan = plan_compaction(&[full.clone(), full]).unwrap();
        // No reduction: skip.
        assert!(!should_compact(&eng, &[ct.clone(), ct.clone()], &plan));
        // Identity application hands the inputs back untouched.
        let mut counter = OpCounter::new();
        let out = apply_compaction(&eng, &[ct.clone(), ct.clone()], &plan, &mut counter).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(counter.total().rotations, 0);

        // A worthwhile plan, but the inputs sit at level 0 with no
        // headroom for the mask multiply: skip.
        let sparse = SlotUsage::from_mask((0..l).map(|i| i < 2).collect(), "sparse");
        let drained = {
            let mut c = ct;
            while c.level() > 0 {
                c = eng.ctx().mod_switch(&c).unwrap();
            }
            c
        };
        let plan = plan_compaction(&[sparse.clone(), sparse]).unwrap();
        assert!(plan.dst_count() < 2);
        assert!(!should_compact(&eng, &[drained.clone(), drained], &plan));
    }
}
