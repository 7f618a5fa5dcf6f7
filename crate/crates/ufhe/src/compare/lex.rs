//! Combining per-digit bits into per-integer verdicts.
//!
//! Digits sit at logical positions, least significant first, `k` to a
//! block. Given per-position less-than and equality bits, the
//! lexicographic pass computes, at every block's base position, the
//! whole-block less-than and equality in `ceil(log2 k) + 1`
//! multiplications:
//!
//! 1. An inclusive suffix scan turns equality bits into "all digits
//!    from here up are equal" (log rounds of rotate, repair to identity
//!    across block edges, multiply).
//! 2. One more rotation makes it exclusive ("all *strictly higher*
//!    digits equal").
//! 3. One multiplication gates each digit's less-than by that run, and
//!    a rotate-and-add fold (additions only) sums the gated bits into
//!    the base position.
//!
//! When one integer's digits span several ciphertexts, per-ciphertext
//! verdicts chain most-significant first at two multiplications per
//! extra ciphertext.

use crate::bgv::Ciphertext;
use crate::error::Result;
use crate::metrics::{OpCounter, Phase};

use super::CompareEngine;

/// Per-block `(lt, eq)` ciphertexts; valid at block base positions.
pub struct BlockVerdicts {
    pub lt: Ciphertext,
    pub eq: Ciphertext,
}

impl CompareEngine {
    /// Identity-repair after a downward rotation by `shift`: positions
    /// whose source fell outside their own block become 1.
    fn repair_identity(
        &self,
        ct: &Ciphertext,
        k: usize,
        shift: usize,
        blocks: usize,
        counter: &mut OpCounter,
        phase: Phase,
    ) -> Result<Ciphertext> {
        let l = self.positions();
        let mut keep = vec![0u64; l];
        let mut fill = vec![0u64; l];
        for pos in 0..l {
            let in_block = pos < blocks * k && (pos % k) + shift <= k - 1;
            if in_block {
                keep[pos] = 1;
            } else {
                fill[pos] = 1;
            }
        }
        let kept = self.ctx().mul_plain(ct, &self.position_poly(&keep)?)?;
        counter.count_scalar(phase, 1);
        counter.count_add(phase, 1);
        self.ctx().add_plain(&kept, &self.position_poly(&fill)?)
    }

    /// Zero-repair: positions whose source fell outside their own block
    /// become 0 (used by the additive fold).
    fn repair_zero(
        &self,
        ct: &Ciphertext,
        k: usize,
        shift: usize,
        blocks: usize,
        counter: &mut OpCounter,
        phase: Phase,
    ) -> Result<Ciphertext> {
        let l = self.positions();
        let mut keep = vec![0u64; l];
        for (pos, k_e) in keep.iter_mut().enumerate() {
            if pos < blocks * k && (pos % k) + shift <= k - 1 {
                *k_e = 1;
            }
        }
        counter.count_scalar(phase, 1);
        self.ctx().mul_plain(ct, &self.position_poly(&keep)?)
    }

    /// Combines per-digit bits into per-block verdicts. `k` is the
    /// digits-per-block count; every complete block of `k` positions is
    /// processed independently and in parallel (SIMD).
    pub fn lex_combine(
        &self,
        lt_bits: &Ciphertext,
        eq_bits: &Ciphertext,
        k: usize,
        counter: &mut OpCounter,
    ) -> Result<BlockVerdicts> {
        assert!(k >= 1, "blocks need at least one digit");
        let l = self.positions();
        assert!(k <= l, "block larger than the slot count");
        let blocks = l / k;
        if k == 1 {
            return Ok(BlockVerdicts {
                lt: lt_bits.clone(),
                eq: eq_bits.clone(),
            });
        }
        let rounds = usize::BITS as usize - (k - 1).leading_zeros() as usize;
        // Inclusive suffix product of equality bits.
        let mut inc = eq_bits.clone();
        for t in 0..rounds {
            let shift = 1usize << t;
            if shift >= k {
                break;
            }
            let rotated = self.rotate_logical(&inc, shift, counter, Phase::ShiftMul)?;
            let repaired =
                self.repair_identity(&rotated, k, shift, blocks, counter, Phase::ShiftMul)?;
            let (a, b) = self.ctx().align_levels(&inc, &repaired)?;
            counter.count_nonscalar(Phase::ShiftMul, 1);
            inc = self.ctx().he_mul(&self.rlk, &a, &b)?;
        }
        // Exclusive variant: shift down one more, identity at block top.
        let rotated = self.rotate_logical(&inc, 1, counter, Phase::ShiftMul)?;
        let exc = self.repair_identity(&rotated, k, 1, blocks, counter, Phase::ShiftMul)?;
        // Gate each digit's lt by "all higher digits equal".
        let (a, b) = self.ctx().align_levels(lt_bits, &exc)?;
        counter.count_nonscalar(Phase::LtEq, 1);
        let mut acc = self.ctx().he_mul(&self.rlk, &a, &b)?;
        // Additive fold into the block base.
        for t in 0..rounds {
            let shift = 1usize << t;
            if shift >= k {
                break;
            }
            let rotated = self.rotate_logical(&acc, shift, counter, Phase::ShiftAdd)?;
            let addend = self.repair_zero(&rotated, k, shift, blocks, counter, Phase::ShiftAdd)?;
            counter.count_add(Phase::ShiftAdd, 1);
            acc = self.ctx().add(&acc, &addend)?;
        }
        Ok(BlockVerdicts { lt: acc, eq: inc })
    }

    /// Chains per-ciphertext verdicts for one integer whose digits span
    /// several ciphertexts, ordered least significant first. Two
    /// multiplications per extra ciphertext.
    pub fn combine_across_cts(
        &self,
        parts: &[BlockVerdicts],
        counter: &mut OpCounter,
    ) -> Result<BlockVerdicts> {
        assert!(!parts.is_empty());
        let mut iter = parts.iter().rev(); // most significant first
        let first = iter.next().unwrap();
        let mut lt = first.lt.clone();
        let mut eq = first.eq.clone();
        for lower in iter {
            // lt = lt_hi + eq_hi * lt_lo; eq = eq_hi * eq_lo.
            let (eq_hi, lt_lo) = self.ctx().align_levels(&eq, &lower.lt)?;
            counter.count_nonscalar(Phase::LtEq, 1);
            let gated = self.ctx().he_mul(&self.rlk, &eq_hi, &lt_lo)?;
            let (lt_hi, gated) = self.ctx().align_levels(&lt, &gated)?;
            counter.count_add(Phase::LtEq, 1);
            lt = self.ctx().add(&lt_hi, &gated)?;
            let (eq_hi, eq_lo) = self.ctx().align_levels(&eq, &lower.eq)?;
            counter.count_nonscalar(Phase::LtEq, 1);
            eq = self.ctx().he_mul(&self.rlk, &eq_hi, &eq_lo)?;
            let (a, b) = self.ctx().align_levels(&lt, &eq)?;
            lt = a;
            eq = b;
        }
        Ok(BlockVerdicts { lt, eq })
    }

    /// Broadcasts the value at each block's base position to the whole
    /// block (additions and masks only). Positions outside complete
    /// blocks end up zero.
    pub fn broadcast_base(
        &self,
        ct: &Ciphertext,
        k: usize,
        counter: &mut OpCounter,
    ) -> Result<Ciphertext> {
        let l = self.positions();
        let blocks = l / k;
        // Start from the bases only.
        let mut base_mask = vec![0u64; l];
        for b in 0..blocks {
            base_mask[b * k] = 1;
        }
        counter.count_scalar(Phase::ShiftAdd, 1);
        let mut acc = self.ctx().mul_plain(ct, &self.position_poly(&base_mask)?)?;
        // Controlled doubling: after each round positions [0, covered)
        // of every block hold the base value.
        let mut covered = 1usize;
        while covered < k {
            let step = covered.min(k - covered);
            // Upward rotation by `step`: content moves to higher
            // positions; realized as a downward rotation by l - step.
            let rotated = self.rotate_logical(&acc, l - step, counter, Phase::ShiftAdd)?;
            let mut mask = vec![0u64; l];
            for b in 0..blocks {
                for o in covered..covered + step {
                    mask[b * k + o] = 1;
                }
            }
            counter.count_scalar(Phase::ShiftAdd, 1);
            let addend = self
                .ctx()
                .mul_plain(&rotated, &self.position_poly(&mask)?)?;
            counter.count_add(Phase::ShiftAdd, 1);
            acc = self.ctx().add(&acc, &addend)?;
            covered += step;
        }
        Ok(acc)
    }
}
