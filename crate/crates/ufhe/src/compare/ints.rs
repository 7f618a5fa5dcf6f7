//! Radix packing of integers into digit slots, and batched comparison.
//!
//! An integer becomes `k` digits, least significant at the block's base
//! position, in the radix the circuit kind allows: the full prime `p`
//! for bivariate circuits, the half alphabet `(p+1)/2` for univariate
//! ones. A ciphertext carries `floor(positions / k)` integers side by
//! side; when `k` exceeds the position count, one integer spans several
//! ciphertexts and the per-ciphertext verdicts are chained.

use std::sync::Arc;

use crate::bgv::{Ciphertext, PublicKey, SecretKey};
use crate::error::{Error, Result};
use crate::metrics::OpCounter;
use crate::rng::SplitRng;

use super::exec::{JobFn, JobOutput};
use super::lex::BlockVerdicts;
use super::CompareEngine;

/// Smallest digit count whose radix power covers `bits` bits.
pub fn digits_for_bits(radix: u64, bits: u32) -> usize {
    assert!(radix >= 2);
    let target: u128 = 1u128 << bits;
    let mut k = 0usize;
    let mut cover: u128 = 1;
    while cover < target {
        cover = cover.saturating_mul(radix as u128);
        k += 1;
    }
    k.max(1)
}

/// Little-endian digits of `v`; error when `v` needs more than `k`.
pub fn to_digits(v: u64, radix: u64, k: usize) -> Result<Vec<u64>> {
    let mut digits = vec![0u64; k];
    let mut rest = v;
    for d in digits.iter_mut() {
        *d = rest % radix;
        rest /= radix;
    }
    if rest != 0 {
        let max = (radix as u128).pow(k as u32) - 1;
        return Err(Error::OutOfRange {
            value: v,
            what: "integer too wide for the digit count",
            max: max.min(u64::MAX as u128) as u64,
        });
    }
    Ok(digits)
}

/// Recomposes little-endian digits.
pub fn from_digits(digits: &[u64], radix: u64) -> u64 {
    digits
        .iter()
        .rev()
        .fold(0u64, |acc, &d| acc * radix + d)
}

impl CompareEngine {
    /// How many `k`-digit integers fit in one ciphertext.
    pub fn ints_per_ct(&self, k: usize) -> usize {
        self.positions() / k
    }

    /// Digits per integer of the given bit width under this engine's
    /// alphabet.
    pub fn digits_for(&self, bits: u32) -> usize {
        digits_for_bits(self.alphabet(), bits)
    }

    /// Lays out up to `ints_per_ct(k)` integers as a per-position digit
    /// vector (unused positions zero).
    pub fn pack_ints(&self, vals: &[u64], k: usize) -> Result<Vec<u64>> {
        let cap = self.ints_per_ct(k);
        if vals.len() > cap || cap == 0 {
            return Err(Error::CapacityExceeded {
                context: "integers per ciphertext",
                needed: vals.len().max(1),
                available: cap,
            });
        }
        let mut by_pos = vec![0u64; self.positions()];
        for (t, &v) in vals.iter().enumerate() {
            let digits = to_digits(v, self.alphabet(), k)?;
            by_pos[t * k..t * k + k].copy_from_slice(&digits);
        }
        Ok(by_pos)
    }

    /// Validates and lays out raw digit vectors (least significant
    /// first) instead of integers.
    pub fn pack_digit_vectors(&self, digit_vecs: &[Vec<u64>], k: usize) -> Result<Vec<u64>> {
        let cap = self.ints_per_ct(k);
        if digit_vecs.len() > cap || cap == 0 {
            return Err(Error::CapacityExceeded {
                context: "digit vectors per ciphertext",
                needed: digit_vecs.len().max(1),
                available: cap,
            });
        }
        let mut by_pos = vec![0u64; self.positions()];
        for (t, digits) in digit_vecs.iter().enumerate() {
            if digits.len() != k {
                return Err(Error::BadLength {
                    expected: k,
                    got: digits.len(),
                    context: "digit vector",
                });
            }
            for (j, &d) in digits.iter().enumerate() {
                if d >= self.alphabet() {
                    return Err(Error::AlphabetViolation {
                        digit: d,
                        alphabet: self.alphabet(),
                        p: self.params().p,
                    });
                }
                by_pos[t * k + j] = d;
            }
        }
        Ok(by_pos)
    }

    /// Packs and encrypts integers into one ciphertext.
    pub fn encrypt_ints(
        &self,
        pk: &PublicKey,
        vals: &[u64],
        k: usize,
        rng: &mut SplitRng,
    ) -> Result<Ciphertext> {
        let by_pos = self.pack_ints(vals, k)?;
        self.encrypt_positions(pk, &by_pos, rng)
    }

    /// Encrypts one integer wider than a single ciphertext: digit chunks
    /// of at most `positions` spread across `ceil(k / positions)`
    /// ciphertexts, least significant chunk first.
    pub fn encrypt_wide_int(
        &self,
        pk: &PublicKey,
        v: u64,
        k: usize,
        rng: &mut SplitRng,
    ) -> Result<Vec<Ciphertext>> {
        let l = self.positions();
        let digits = to_digits(v, self.alphabet(), k)?;
        let mut cts = Vec::new();
        let mut at = 0usize;
        while at < k {
            let take = l.min(k - at);
            let mut by_pos = vec![0u64; l];
            by_pos[..take].copy_from_slice(&digits[at..at + take]);
            cts.push(self.encrypt_positions(pk, &by_pos, rng)?);
            at += take;
        }
        Ok(cts)
    }

    /// Full packed comparison: digit circuit plus lexicographic
    /// combine. Verdicts land at block bases.
    pub fn compare_packed(
        &self,
        x: &Ciphertext,
        y: &Ciphertext,
        k: usize,
        counter: &mut OpCounter,
    ) -> Result<BlockVerdicts> {
        let (lt, eq) = self.eval_circuit(x, y, counter)?;
        self.lex_combine(&lt, &eq, k, counter)
    }

    /// Comparison of wide integers spanning several ciphertexts; chunk
    /// `c` holds `min(positions, k - c * positions)` digits.
    pub fn compare_wide(
        &self,
        xs: &[Ciphertext],
        ys: &[Ciphertext],
        k: usize,
        counter: &mut OpCounter,
    ) -> Result<BlockVerdicts> {
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch {
                left: xs.len(),
                right: ys.len(),
                context: "wide operand chunk lists",
            });
        }
        let l = self.positions();
        let mut parts = Vec::with_capacity(xs.len());
        let mut at = 0usize;
        for (cx, cy) in xs.iter().zip(ys.iter()) {
            let take = l.min(k - at);
            let (lt, eq) = self.eval_circuit(cx, cy, counter)?;
            parts.push(self.lex_combine(&lt, &eq, take, counter)?);
            at += take;
        }
        self.combine_across_cts(&parts, counter)
    }

    /// Runs many packed comparisons through the engine's executor; the
    /// result order matches the input order and the merged counter is
    /// returned alongside.
    pub fn compare_batch(
        self: &Arc<Self>,
        pairs: Vec<(Ciphertext, Ciphertext)>,
        k: usize,
    ) -> Result<(Vec<BlockVerdicts>, OpCounter)> {
        let jobs: Vec<JobFn> = pairs
            .into_iter()
            .map(|(cx, cy)| {
                let eng = Arc::clone(self);
                let f: JobFn = Box::new(move |_scratch| {
                    let mut counter = OpCounter::new();
                    let out = eng
                        .compare_packed(&cx, &cy, k, &mut counter)
                        .map(|v| (v, counter));
                    Box::new(out) as JobOutput
                });
                f
            })
            .collect();
        let results = self.executor().run(jobs)?;
        let mut merged = OpCounter::new();
        let mut verdicts = Vec::with_capacity(results.len());
        for r in results {
            let unpacked = r
                .downcast::<Result<(BlockVerdicts, OpCounter)>>()
                .expect("job output type");
            let (v, c) = (*unpacked)?;
            merged.merge(&c);
            verdicts.push(v);
        }
        Ok((verdicts, merged))
    }

    /// Runs many wide comparisons through the engine's executor; each
    /// pair is one job, results keep submission order, and the merged
    /// counter is returned alongside.
    pub fn compare_wide_batch(
        self: &Arc<Self>,
        pairs: Vec<(Vec<Ciphertext>, Vec<Ciphertext>)>,
        k: usize,
    ) -> Result<(Vec<BlockVerdicts>, OpCounter)> {
        let jobs: Vec<JobFn> = pairs
            .into_iter()
            .map(|(xs, ys)| {
                let eng = Arc::clone(self);
                let f: JobFn = Box::new(move |_scratch| {
                    let mut counter = OpCounter::new();
                    let out = eng
                        .compare_wide(&xs, &ys, k, &mut counter)
                        .map(|v| (v, counter));
                    Box::new(out) as JobOutput
                });
                f
            })
            .collect();
        let results = self.executor().run(jobs)?;
        let mut merged = OpCounter::new();
        let mut verdicts = Vec::with_capacity(results.len());
        for r in results {
            let unpacked = r
                .downcast::<Result<(BlockVerdicts, OpCounter)>>()
                .expect("job output type");
            let (v, c) = (*unpacked)?;
            merged.merge(&c);
            verdicts.push(v);
        }
        Ok((verdicts, merged))
    }

    /// Reads the values at every block base position.
    pub fn read_block_bits(
        &self,
        sk: &SecretKey,
        ct: &Ciphertext,
        k: usize,
    ) -> Result<Vec<u64>> {
        let by_pos = self.decrypt_positions(sk, ct)?;
        Ok((0..self.ints_per_ct(k)).map(|b| by_pos[b * k]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::super::{setup, ClientKeys, CompareParams};
    use super::*;
    use crate::transform::PlanCache;

    fn engine(name: &str) -> (Arc<CompareEngine>, ClientKeys) {
        let cache = PlanCache::new();
        setup(CompareParams::preset(name).unwrap(), 1, 2024, &cache).unwrap()
    }

    #[test]
    fn digit_round_trips_and_widths() {
        assert_eq!(digits_for_bits(3, 6), 4); // 3^4 = 81 >= 64
        assert_eq!(digits_for_bits(3, 32), 21);
        assert_eq!(digits_for_bits(5, 32), 14);
        assert_eq!(digits_for_bits(9, 8), 3); // 9^3 = 729 >= 256
        assert_eq!(digits_for_bits(9, 32), 11);
        for v in [0u64, 1, 80, 255, 12345] {
            let d = to_digits(v, 3, 10).unwrap();
            assert_eq!(from_digits(&d, 3), v);
        }
        assert!(matches!(
            to_digits(81, 3, 4),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn packing_rejects_overflow_and_bad_digits() {
        let (eng, _) = engine("t3a");
        let k = 4;
        let cap = eng.ints_per_ct(k); // 12 / 4 = 3
        assert_eq!(cap, 3);
        assert!(matches!(
            eng.pack_ints(&vec![1; cap + 1], k),
            Err(Error::CapacityExceeded { .. })
        ));
        assert!(matches!(
            eng.pack_digit_vectors(&[vec![0, 1, 2, 3]], k),
            Err(Error::AlphabetViolation {
                digit: 3,
                alphabet: 3,
                p: 3
            })
        ));
        assert!(matches!(
            eng.pack_digit_vectors(&[vec![0, 1]], k),
            Err(Error::BadLength { .. })
        ));
    }

    #[test]
    fn packed_compare_exhaustive_small() {
        // All 6-bit pairs would be slow here; a stratified sample that
        // still covers equal, close, and far pairs.
        let (eng, keys) = engine("t3a");
        let k = 4usize; // 3^4 = 81 >= 64
        let cap = eng.ints_per_ct(k);
        let mut rng = SplitRng::from_seed(1);
        let mut pairs: Vec<(u64, u64)> = Vec::new();
        for a in (0..64u64).step_by(7) {
            for b in (0..64u64).step_by(11) {
                pairs.push((a, b));
            }
            pairs.push((a, a));
        }
        let mut idx = 0;
        while idx < pairs.len() {
            let chunk: Vec<(u64, u64)> = pairs[idx..(idx + cap).min(pairs.len())].to_vec();
            idx += chunk.len();
            let avals: Vec<u64> = chunk.iter().map(|&(a, _)| a).collect();
            let bvals: Vec<u64> = chunk.iter().map(|&(_, b)| b).collect();
            let ca = eng.encrypt_ints(&keys.pk, &avals, k, &mut rng).unwrap();
            let cb = eng.encrypt_ints(&keys.pk, &bvals, k, &mut rng).unwrap();
            let mut counter = OpCounter::new();
            let v = eng.compare_packed(&ca, &cb, k, &mut counter).unwrap();
            let lt = eng.read_block_bits(&keys.sk, &v.lt, k).unwrap();
            let eq = eng.read_block_bits(&keys.sk, &v.eq, k).unwrap();
            for (t, &(a, b)) in chunk.iter().enumerate() {
                assert_eq!(lt[t], u64::from(a < b), "{a} < {b}");
                assert_eq!(eq[t], u64::from(a == b), "{a} == {b}");
            }
        }
    }

    #[test]
    fn batch_runs_through_executor_and_merges_counts() {
        let (eng, keys) = engine("t3a");
        let k = 4usize;
        let cap = eng.ints_per_ct(k);
        let mut rng = SplitRng::from_seed(17);
        let mut pairs = Vec::new();
        let mut expected = Vec::new();
        for _ in 0..3 {
            let avals: Vec<u64> = (0..cap).map(|_| rng.below(64)).collect();
            let bvals: Vec<u64> = (0..cap).map(|_| rng.below(64)).collect();
            let ca = eng.encrypt_ints(&keys.pk, &avals, k, &mut rng).unwrap();
            let cb = eng.encrypt_ints(&keys.pk, &bvals, k, &mut rng).unwrap();
            pairs.push((ca, cb));
            expected.push((avals, bvals));
        }
        let (verdicts, counter) = eng.compare_batch(pairs, k).unwrap();
        assert_eq!(verdicts.len(), 3);
        // Per-pair count = circuit + lex; three pairs.
        let per_pair = eng.circuits().nonscalar_mults() as u64 + 2 + 1;
        assert_eq!(counter.total().nonscalar_mults, 3 * per_pair);
        for (v, (avals, bvals)) in verdicts.iter().zip(&expected) {
            let lt = eng.read_block_bits(&keys.sk, &v.lt, k).unwrap();
            for t in 0..cap {
                assert_eq!(lt[t], u64::from(avals[t] < bvals[t]));
            }
        }
    }

    #[test]
    fn wide_integers_span_ciphertexts() {
        // t5: 10 positions; 14 digits of radix 5 cover 32 bits, so a
        // wide integer needs two ciphertexts (10 + 4 digits).
        let (eng, keys) = engine("t5");
        let k = eng.digits_for(32);
        assert_eq!(k, 14);
        assert!(k > eng.positions());
        let mut rng = SplitRng::from_seed(3);
        let cases = [
            (0u64, 1u64),
            (4_294_967_295, 4_294_967_295),
            (1_000_000_000, 999_999_999),
            (123_456_789, 123_456_790),
        ];
        for (a, b) in cases {
            let xs = eng.encrypt_wide_int(&keys.pk, a, k, &mut rng).unwrap();
            let ys = eng.encrypt_wide_int(&keys.pk, b, k, &mut rng).unwrap();
            assert_eq!(xs.len(), 2);
            let mut counter = OpCounter::new();
            let v = eng.compare_wide(&xs, &ys, k, &mut counter).unwrap();
            let lt = eng.decrypt_positions(&keys.sk, &v.lt).unwrap();
            let eq = eng.decrypt_positions(&keys.sk, &v.eq).unwrap();
            assert_eq!(lt[0], u64::from(a < b), "{a} < {b}");
            assert_eq!(eq[0], u64::from(a == b), "{a} == {b}");
        }
    }
}
