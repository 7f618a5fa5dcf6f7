//! Deterministic randomness with labeled sub-streams.
//!
//! All randomness in the library flows through [`SplitRng`], a ChaCha12
//! generator that can be forked into independent child streams by label.
//! Given the same master seed and the same sequence of `split` / draw
//! calls, every derived value is reproducible, which keeps key generation,
//! encryption, benchmarks, and demo applications bit-stable across runs.
//!
//! Worker threads never own an RNG: anything random is drawn while jobs
//! are being described, so thread scheduling cannot perturb results.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Half-width of the error-sampler support: coefficients lie in
/// [-ERROR_CUT, ERROR_CUT].
pub const ERROR_CUT: i64 = 19;

/// Standard deviation of the (truncated, discretized) Gaussian error
/// distribution, in tenths: 3.2.
const ERROR_SIGMA_TENTHS: u64 = 32;

/// A seedable, splittable deterministic random generator.
pub struct SplitRng {
    inner: ChaCha12Rng,
}

impl SplitRng {
    /// Creates a generator from a 64-bit master seed.
    pub fn from_seed(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        // Fixed domain tag so a master SplitRng is distinguishable from a
        // child that happened to receive the same first eight bytes.
        key[8..16].copy_from_slice(b"ufhemain");
        Self {
            inner: ChaCha12Rng::from_seed(key),
        }
    }

    /// Forks an independent child stream identified by `label`.
    ///
    /// The child seed mixes fresh output of the parent with the label
    /// bytes, so distinct labels (or repeated splits under one label)
    /// yield unrelated streams while remaining fully deterministic.
    pub fn split(&mut self, label: &str) -> SplitRng {
        let mut key = [0u8; 32];
        self.inner.fill_bytes(&mut key);
        for (i, b) in label.bytes().enumerate() {
            key[i % 32] ^= b;
        }
        SplitRng {
            inner: ChaCha12Rng::from_seed(key),
        }
    }

    /// Next raw 64-bit value.
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform value in `[0, bound)` by rejection; `bound` must be nonzero.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "below(0) is meaningless");
        // Largest multiple of `bound` that fits in u64; values at or above
        // it are rejected to avoid modulo bias.
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.inner.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    /// Uniform ternary secret coefficient in {-1, 0, 1}.
    pub fn ternary(&mut self) -> i64 {
        self.below(3) as i64 - 1
    }

    /// One coefficient of the error distribution: a discretized Gaussian
    /// with standard deviation 3.2, truncated to [-19, 19].
    pub fn error_coeff(&mut self) -> i64 {
        let table = error_table();
        let v = self.next_u64();
        // The table is tiny (39 entries); a linear scan is branch-predictable
        // and avoids any data-dependent timing concern we do not have anyway.
        let mut idx = table.len() - 1;
        for (i, &t) in table.iter().enumerate() {
            if v < t {
                idx = i;
                break;
            }
        }
        idx as i64 - ERROR_CUT
    }

    /// Fills `out` with uniform residues modulo `q`.
    pub fn fill_uniform_mod(&mut self, out: &mut [u64], q: u64) {
        for slot in out.iter_mut() {
            *slot = self.below(q);
        }
    }
}

/// Cumulative u64 thresholds for the truncated discrete Gaussian.
///
/// Entry `i` is the (exclusive) upper threshold for outcome `i - ERROR_CUT`.
/// Built once from fixed closed-form weights; the construction uses only
/// exactly-representable f64 steps so the table is identical on every
/// platform.
fn error_table() -> &'static [u64; 2 * ERROR_CUT as usize + 1] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[u64; 2 * ERROR_CUT as usize + 1]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = 2 * ERROR_CUT as usize + 1;
        let sigma = ERROR_SIGMA_TENTHS as f64 / 10.0;
        let mut weights = [0f64; 2 * ERROR_CUT as usize + 1];
        let mut total = 0f64;
        for (i, w) in weights.iter_mut().enumerate() {
            let x = i as f64 - ERROR_CUT as f64;
            *w = (-x * x / (2.0 * sigma * sigma)).exp();
            total += *w;
        }
        let mut table = [0u64; 2 * ERROR_CUT as usize + 1];
        let mut acc = 0f64;
        for i in 0..n {
            acc += weights[i];
            // Map the cumulative fraction onto the full u64 range.
            let frac = acc / total;
            table[i] = if i + 1 == n {
                u64::MAX
            } else {
                (frac * (u64::MAX as f64)) as u64
            };
        }
        table
    })
}
