//! Applications built on the comparison engine: tournament minimum and
//! rank sorting.
//!
//! Both work on digit-packed integers (one integer per ciphertext in
//! the usual case) and are blockwise: every complete block of `k`
//! positions is processed independently, so callers that pack several
//! integers per ciphertext get the corresponding SIMD semantics.

use std::sync::Arc;

use crate::bgv::Ciphertext;
use crate::error::Result;
use crate::metrics::{OpCounter, Phase};

use super::CompareEngine;

impl CompareEngine {
    fn add_aligned(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        let (a, b) = self.ctx().align_levels(a, b)?;
        self.ctx().add(&a, &b)
    }

    fn sub_aligned(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        let (a, b) = self.ctx().align_levels(a, b)?;
        self.ctx().sub(&a, &b)
    }

    /// Raises `ct` to the fixed exponent `e >= 1` by square-and-multiply
    /// (most significant bit first), `floor(log2 e)` squarings plus one
    /// multiplication per set low bit.
    pub fn pow_const(
        &self,
        ct: &Ciphertext,
        e: u64,
        counter: &mut OpCounter,
    ) -> Result<Ciphertext> {
        assert!(e >= 1, "exponent must be positive");
        let ctx = self.ctx();
        let rlk = self.relin_key();
        let bits = 64 - e.leading_zeros();
        let mut acc = ct.clone();
        for i in (0..bits - 1).rev() {
            counter.count_nonscalar(Phase::LtEq, 1);
            acc = ctx.he_mul(rlk, &acc, &acc)?;
            if (e >> i) & 1 == 1 {
                let (a, b) = ctx.align_levels(&acc, ct)?;
                counter.count_nonscalar(Phase::LtEq, 1);
                acc = ctx.he_mul(rlk, &a, &b)?;
            }
        }
        Ok(acc)
    }

    /// Blockwise minimum of a list of digit-packed integers by a
    /// tournament: `ceil(log2 n)` rounds of pairwise
    /// `min(a, b) = b + (a - b) * [a < b]`, the verdict bit broadcast
    /// across each block so the mux works digit by digit. Odd layers are
    /// padded with an all-max sentinel that loses every pairing.
    pub fn min_tournament(
        &self,
        items: &[Ciphertext],
        k: usize,
        counter: &mut OpCounter,
    ) -> Result<Ciphertext> {
        assert!(!items.is_empty(), "minimum of an empty list");
        let ctx = self.ctx();
        let rlk = self.relin_key();
        let mut layer: Vec<Ciphertext> = items.to_vec();
        if layer.len() > 1 && !layer.len().is_power_of_two() {
            let l = self.positions();
            let top = self.alphabet() - 1;
            let mut by_pos = vec![0u64; l];
            for b in 0..l / k {
                for d in by_pos[b * k..b * k + k].iter_mut() {
                    *d = top;
                }
            }
            let poly = self.position_poly(&by_pos)?;
            let level = layer.iter().map(Ciphertext::level).min().unwrap();
            let sentinel = ctx.trivial(&poly, level)?;
            layer.resize_with(layer.len().next_power_of_two(), || sentinel.clone());
        }
        while layer.len() > 1 {
            let mut next = Vec::with_capacity(layer.len() / 2);
            for pair in layer.chunks(2) {
                let (a, b) = ctx.align_levels(&pair[0], &pair[1])?;
                let v = self.compare_packed(&a, &b, k, counter)?;
                let bit = self.broadcast_base(&v.lt, k, counter)?;
                let diff = ctx.sub(&a, &b)?;
                let (diff, bit) = ctx.align_levels(&diff, &bit)?;
                counter.count_nonscalar(Phase::LtEq, 1);
                let sel = ctx.he_mul(rlk, &diff, &bit)?;
                next.push(self.add_aligned(&b, &sel)?);
            }
            layer = next;
        }
        Ok(layer.pop().unwrap())
    }

    /// Sorts digit-packed integers (one per ciphertext, block 0) into
    /// ascending order without decrypting. The pairwise verdict matrix
    /// gives each input an encrypted rank
    /// `rank_i = #[a_j < a_i] + #[j < i, a_j = a_i]` (ties broken by
    /// index, so ranks are a permutation even with duplicates); output
    /// `t` then selects the input whose rank equals `t` via the
    /// indicator `1 - (rank_i - t)^(p-1)`.
    pub fn sort_rank(
        self: &Arc<Self>,
        items: &[Ciphertext],
        k: usize,
        counter: &mut OpCounter,
    ) -> Result<Vec<Ciphertext>> {
        let n = items.len();
        assert!(n >= 1, "sorting an empty list");
        if n == 1 {
            return Ok(vec![items[0].clone()]);
        }
        let ctx = self.ctx();
        let rlk = self.relin_key();
        let p = self.params().p;
        let l = self.positions();

        // Verdicts for every pair i < j, through the executor.
        let mut pairs = Vec::new();
        let mut index = vec![vec![usize::MAX; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                index[i][j] = pairs.len();
                pairs.push((items[i].clone(), items[j].clone()));
            }
        }
        let (verdicts, sub) = self.compare_batch(pairs, k)?;
        counter.merge(&sub);

        // Encrypted rank of every input, as a value at position 0.
        let mut pos0 = vec![0u64; l];
        pos0[0] = 1;
        let mut ranks = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc: Option<Ciphertext> = None;
            for j in 0..n {
                if j == i {
                    continue;
                }
                // Contribution of j to rank_i:
                //   j < i: lt_ji + eq_ji
                //   j > i: 1 - lt_ij - eq_ij  (constant added below)
                let v = if j < i {
                    &verdicts[index[j][i]]
                } else {
                    &verdicts[index[i][j]]
                };
                let term = self.add_aligned(&v.lt, &v.eq)?;
                counter.count_add(Phase::LtEq, 1);
                acc = Some(match acc {
                    None if j < i => term,
                    None => ctx.neg(&term),
                    Some(a) if j < i => self.add_aligned(&a, &term)?,
                    Some(a) => self.sub_aligned(&a, &term)?,
                });
            }
            let acc = acc.unwrap();
            // Junk outside position 0 (partial fold sums, other block
            // bases) dies here; then the constant #(j > i) lands.
            let masked = self.mask_positions(&acc, &pos0, counter, Phase::ShiftAdd)?;
            let mut c = vec![0u64; l];
            c[0] = (n - 1 - i) as u64 % p;
            counter.count_add(Phase::ShiftAdd, 1);
            let rank = ctx.add_plain(&masked, &self.position_poly(&c)?)?;
            // The rotations feeding the verdicts leave a bound too wide
            // to survive the squarings of the indicator's power chain;
            // one switch compresses it first.
            let rank = if rank.level() > 0 {
                ctx.mod_switch(&rank)?
            } else {
                rank
            };
            ranks.push(rank);
        }

        // Output t = sum_i items_i * [rank_i == t]. Every target needs
        // (rank_i - t)^(p-1), so each input gets one table of powers
        // rank_i^1..rank_i^(p-1) (p-2 multiplications, log-depth) and the
        // n indicators become scalar recombinations via the binomial
        // expansion of (rank - t)^(p-1) over F_p.
        let md = crate::arith::Modulus::new(p);
        let binom = pascal_row(p);
        let mut tables: Vec<Vec<Ciphertext>> = Vec::with_capacity(n);
        for rank in &ranks {
            let mut pw: Vec<Ciphertext> = Vec::with_capacity(p as usize);
            pw.push(rank.clone()); // pw[j] = rank^(j+1)
            for j in 2..p as usize {
                let lo = j / 2;
                let hi = j - lo;
                let (a, b) = ctx.align_levels(&pw[lo - 1], &pw[hi - 1])?;
                counter.count_nonscalar(Phase::LtEq, 1);
                pw.push(ctx.he_mul(rlk, &a, &b)?);
            }
            // Drop everything to the deepest power's level so the scalar
            // sums below see uniform levels.
            let floor = pw.last().unwrap().level();
            for c in &mut pw {
                while c.level() > floor {
                    *c = ctx.mod_switch(c)?;
                }
            }
            tables.push(pw);
        }

        let mut out = Vec::with_capacity(n);
        for t in 0..n {
            let neg_t = (p - t as u64 % p) % p;
            let mut acc: Option<Ciphertext> = None;
            for (i, item) in items.iter().enumerate() {
                // (rank - t)^(p-1) = sum_j C(p-1,j) (-t)^(p-1-j) rank^j;
                // the j = p-1 coefficient is 1, so the sum is never empty.
                let pw = &tables[i];
                let mut const_term = 0u64;
                let mut poly: Option<Ciphertext> = None;
                for j in 0..p as usize {
                    let e = p - 1 - j as u64;
                    let tpow = if e == 0 { 1 } else { md.pow(neg_t, e) };
                    let c = md.mul(binom[j], tpow);
                    if c == 0 {
                        continue;
                    }
                    if j == 0 {
                        const_term = c;
                        continue;
                    }
                    counter.count_scalar(Phase::LtEq, 1);
                    let term = ctx.mul_scalar(&pw[j - 1], c);
                    poly = Some(match poly {
                        None => term,
                        Some(a) => {
                            counter.count_add(Phase::LtEq, 1);
                            ctx.add(&a, &term)?
                        }
                    });
                }
                // indicator = 1 - (rank - t)^(p-1), confined to position 0
                // like the rank itself.
                let mut ind_c = vec![0u64; l];
                ind_c[0] = (1 + p - const_term) % p;
                counter.count_add(Phase::LtEq, 1);
                let indicator =
                    ctx.add_plain(&ctx.neg(&poly.unwrap()), &self.position_poly(&ind_c)?)?;
                let spread = self.broadcast_base(&indicator, k, counter)?;
                let (it, sp) = ctx.align_levels(item, &spread)?;
                counter.count_nonscalar(Phase::LtEq, 1);
                let sel = ctx.he_mul(rlk, &it, &sp)?;
                acc = Some(match acc {
                    None => sel,
                    Some(a) => {
                        counter.count_add(Phase::LtEq, 1);
                        self.add_aligned(&a, &sel)?
                    }
                });
            }
            out.push(acc.unwrap());
        }
        Ok(out)
    }
}

/// Row p-1 of Pascal's triangle reduced mod p: C(p-1, j) for j in 0..p.
fn pascal_row(p: u64) -> Vec<u64> {
    let md = crate::arith::Modulus::new(p);
    let mut row = vec![1u64];
    for _ in 1..p {
        let mut next = vec![1u64; row.len() + 1];
        for i in 1..row.len() {
            next[i] = md.add(row[i - 1], row[i]);
        }
        row = next;
    }
    row
}
