//! Word-level modular arithmetic: Barrett-reduced moduli, primality
//! testing, prime generation in arithmetic progressions, primitive-root
//! search, and residue-number-system (RNS) bases with exact CRT
//! composition.
//!
//! Every prime used by the ring layer fits in a single 64-bit word (at
//! most 62 bits), so all hot-path reductions are done with one 128-bit
//! multiply and a variable-shift Barrett step; no big-integer arithmetic
//! appears outside setup and decryption-side CRT composition.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Number of significant bits in `x` (0 for `x == 0`).
#[inline]
pub fn bit_length(x: u64) -> u32 {
    64 - x.leading_zeros()
}

/// Greatest common divisor.
pub fn gcd(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Least common multiple; panics on overflow (inputs here are tiny).
pub fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// Trial-division factorization into (prime, exponent) pairs, ascending.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            let mut e = 0;
            while n % d == 0 {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Euler's totient via trial-division factorization.
pub fn euler_phi(n: u64) -> u64 {
    let mut phi = n;
    for (p, _) in factorize(n) {
        phi = phi / p * (p - 1);
    }
    phi
}

/// Multiplicative order of `a` modulo `m`; requires gcd(a, m) = 1.
pub fn mult_order(a: u64, m: u64) -> u64 {
    assert!(m > 1 && gcd(a % m, m) == 1);
    let mut acc = a % m;
    let mut ord = 1u64;
    while acc != 1 {
        acc = (acc as u128 * a as u128 % m as u128) as u64;
        ord += 1;
    }
    ord
}

/// A word-sized odd prime modulus with a precomputed Barrett constant.
///
/// `k` is the bit length of `q` and `mu = floor(2^(2k) / q)`. The
/// reduction in [`Modulus::mul_mod`] is exact for any product of two
/// residues as long as `k <= 62`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Modulus {
    q: u64,
    k: u32,
    mu: u128,
}

impl Modulus {
    /// Precomputes Barrett constants for `q`; `q` must be odd, at least 3,
    /// and at most 62 bits.
    pub fn new(q: u64) -> Self {
        assert!(q >= 3 && q % 2 == 1, "modulus must be an odd number >= 3");
        let k = bit_length(q);
        assert!(k <= 62, "modulus must fit in 62 bits");
        // 2^(2k) needs up to 124 bits; u128 holds it exactly.
        let mu = (1u128 << (2 * k)) / q as u128;
        Self { q, k, mu }
    }

    /// The modulus value.
    #[inline]
    pub fn q(&self) -> u64 {
        self.q
    }

    /// Bit length of the modulus.
    #[inline]
    pub fn bits(&self) -> u32 {
        self.k
    }

    /// `(a + b) mod q` for reduced inputs.
    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.q && b < self.q);
        let s = a + b;
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }

    /// `(a - b) mod q` for reduced inputs.
    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.q && b < self.q);
        if a >= b {
            a - b
        } else {
            a + self.q - b
        }
    }

    /// `(-a) mod q` for a reduced input.
    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        debug_assert!(a < self.q);
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    /// `(a * b) mod q` by Barrett reduction for reduced inputs.
    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.q && b < self.q);
        let z = a as u128 * b as u128;
        // Quotient estimate: t = floor( floor(z / 2^(k-1)) * mu / 2^(k+1) ).
        // The estimate is at most 2 below the true quotient, so two
        // conditional subtractions complete the reduction.
        let t = ((z >> (self.k - 1)) * self.mu) >> (self.k + 1);
        let mut r = (z - t * self.q as u128) as u64;
        if r >= self.q {
            r -= self.q;
        }
        if r >= self.q {
            r -= self.q;
        }
        r
    }

    /// Reduces an arbitrary u64 into `[0, q)`.
    #[inline]
    pub fn reduce(&self, a: u64) -> u64 {
        a % self.q
    }

    /// Reduces a full 128-bit value into `[0, q)`.
    #[inline]
    pub fn reduce_u128(&self, a: u128) -> u64 {
        (a % self.q as u128) as u64
    }

    /// Maps a signed value into `[0, q)`.
    #[inline]
    pub fn reduce_i64(&self, a: i64) -> u64 {
        let r = a.rem_euclid(self.q as i64);
        r as u64
    }

    /// `a^e mod q` by square-and-multiply.
    pub fn pow(&self, a: u64, mut e: u64) -> u64 {
        let mut base = self.reduce(a);
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse of a nonzero residue; valid because `q` is
    /// prime in every use in this crate.
    pub fn inv(&self, a: u64) -> u64 {
        debug_assert!(a % self.q != 0, "zero has no inverse");
        self.pow(a, self.q - 2)
    }
}

/// Deterministic Miller-Rabin primality test, exact for all u64 inputs.
pub fn miller_rabin(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    let mulmod = |a: u64, b: u64| (a as u128 * b as u128 % n as u128) as u64;
    let powmod = |mut a: u64, mut e: u64| {
        let mut acc = 1u64;
        a %= n;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, a);
            }
            a = mulmod(a, a);
            e >>= 1;
        }
        acc
    };
    // This witness set decides primality exactly for every n < 2^64.
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Generates `count` distinct primes of exactly `bits` bits satisfying
/// `q % step == 1`, searching downward from the top of the bit range.
pub fn gen_primes_in_progression(step: u64, bits: u32, count: usize) -> Result<Vec<u64>> {
    assert!((20..=62).contains(&bits), "bits must be in [20, 62]");
    assert!(step >= 2);
    let hi = (1u64 << bits) - 1;
    let lo = 1u64 << (bits - 1);
    // Largest candidate <= hi that is congruent to 1 mod step.
    let mut cand = hi - ((hi - 1) % step);
    let mut out = Vec::with_capacity(count);
    while cand >= lo && out.len() < count {
        if miller_rabin(cand) {
            out.push(cand);
        }
        if cand < step {
            break;
        }
        cand -= step;
    }
    if out.len() < count {
        return Err(Error::NotEnoughPrimes {
            found: out.len(),
            wanted: count,
            bits,
            step,
        });
    }
    Ok(out)
}

/// Generates transform-friendly primes for ring index `m` and padded
/// convolution length `pad`: each prime is `bits` bits and congruent to 1
/// modulo `lcm(2m, pad)`, so both a primitive 2m-th root (for the
/// evaluation map) and a primitive pad-th root (for the power-of-two FFT)
/// exist modulo the prime.
pub fn gen_ntt_primes(m: u64, pad: u64, bits: u32, count: usize) -> Result<Vec<u64>> {
    gen_ntt_primes_congruent(m, pad, bits, count, 1)
}

/// Like [`gen_ntt_primes`] but additionally requires `q % extra == 1`.
///
/// The encryption layer passes the plaintext modulus here so that modulus
/// switching preserves plaintexts without a correction step.
pub fn gen_ntt_primes_congruent(
    m: u64,
    pad: u64,
    bits: u32,
    count: usize,
    extra: u64,
) -> Result<Vec<u64>> {
    if m < 3 || m % 2 == 0 {
        return Err(Error::InvalidParams(format!(
            "ring index m = {m} must be odd and at least 3"
        )));
    }
    if !pad.is_power_of_two() || pad < 2 * m - 1 {
        return Err(Error::BasisTooSmall {
            pad: pad as usize,
            m,
        });
    }
    let step = lcm(lcm(2 * m, pad), extra.max(1));
    gen_primes_in_progression(step, bits, count)
}

/// Finds an element of exact multiplicative order `order` modulo the
/// prime behind `md`.
pub fn find_root(order: u64, md: &Modulus) -> Result<u64> {
    let q = md.q();
    if (q - 1) % order != 0 {
        return Err(Error::OrderNotDividing {
            order,
            q_minus_1: q - 1,
        });
    }
    let cof = (q - 1) / order;
    let prime_divs: Vec<u64> = factorize(order).into_iter().map(|(p, _)| p).collect();
    // Raising a uniform base to the cofactor lands in the order-`order`
    // subgroup; a short deterministic scan over small bases finds a
    // generator of that subgroup quickly.
    for h in 2..q {
        let g = md.pow(h, cof);
        if g == 1 {
            continue;
        }
        let exact = prime_divs.iter().all(|&r| md.pow(g, order / r) != 1);
        if exact {
            debug_assert_eq!(md.pow(g, order), 1);
            return Ok(g);
        }
    }
    unreachable!("a cyclic group of order q-1 contains elements of every dividing order");
}

/// An ordered chain of RNS primes with precomputed CRT data for every
/// prefix. Level `j` of the encryption scheme works modulo the product of
/// the first `j + 1` primes.
#[derive(Debug, Clone)]
pub struct RnsBasis {
    moduli: Vec<Modulus>,
    /// prefix_products[n] = q_0 * ... * q_{n-1}; entry 0 is 1.
    prefix_products: Vec<BigUint>,
    /// garner[n][i] = ((Q_n / q_i)^{-1} mod q_i) for the prefix of length n.
    garner: Vec<Vec<u64>>,
    /// big_m[n][i] = Q_n / q_i as a big integer, for composition.
    big_m: Vec<Vec<BigUint>>,
}

impl RnsBasis {
    /// Builds a basis from distinct primes (each validated by a
    /// deterministic primality test).
    pub fn new(primes: &[u64]) -> Result<Self> {
        if primes.is_empty() {
            return Err(Error::InvalidParams("empty RNS basis".into()));
        }
        for (i, &p) in primes.iter().enumerate() {
            if !miller_rabin(p) {
                return Err(Error::InvalidParams(format!("basis element {p} is not prime")));
            }
            if primes[..i].contains(&p) {
                return Err(Error::InvalidParams(format!("duplicate basis prime {p}")));
            }
        }
        let moduli: Vec<Modulus> = primes.iter().map(|&p| Modulus::new(p)).collect();
        let mut prefix_products = vec![BigUint::one()];
        for &p in primes {
            let next = prefix_products.last().unwrap() * p;
            prefix_products.push(next);
        }
        let mut garner = vec![Vec::new()];
        let mut big_m = vec![Vec::new()];
        for n in 1..=primes.len() {
            let q_n = &prefix_products[n];
            let mut g_row = Vec::with_capacity(n);
            let mut m_row = Vec::with_capacity(n);
            for i in 0..n {
                let mi = q_n / primes[i];
                let mi_mod = (&mi % primes[i]).to_u64_digits();
                let mi_mod = mi_mod.first().copied().unwrap_or(0);
                let inv = moduli[i].inv(mi_mod);
                g_row.push(inv);
                m_row.push(mi);
            }
            garner.push(g_row);
            big_m.push(m_row);
        }
        Ok(Self {
            moduli,
            prefix_products,
            garner,
            big_m,
        })
    }

    /// Number of primes in the full basis.
    pub fn len(&self) -> usize {
        self.moduli.len()
    }

    /// True if the basis is empty (never, for a constructed basis).
    pub fn is_empty(&self) -> bool {
        self.moduli.is_empty()
    }

    /// The `i`-th prime's Barrett modulus.
    pub fn modulus(&self, i: usize) -> &Modulus {
        &self.moduli[i]
    }

    /// All Barrett moduli, in basis order.
    pub fn moduli(&self) -> &[Modulus] {
        &self.moduli
    }

    /// The raw primes, in basis order.
    pub fn primes(&self) -> Vec<u64> {
        self.moduli.iter().map(|m| m.q()).collect()
    }

    /// Product of the first `n` primes.
    pub fn product_of(&self, n: usize) -> &BigUint {
        &self.prefix_products[n]
    }

    /// `Q_n / q_i` as a big integer, for the prefix of length `n`.
    pub fn crt_m(&self, n: usize, i: usize) -> &BigUint {
        &self.big_m[n][i]
    }

    /// `(Q_n / q_i)^{-1} mod q_i` for the prefix of length `n`.
    pub fn crt_y(&self, n: usize, i: usize) -> u64 {
        self.garner[n][i]
    }

    /// The CRT unit for prime `i` in the prefix of length `n`, reduced
    /// modulo a word `w`: `(Q_n / q_i) * y_i mod w`. The unit is congruent
    /// to 1 modulo `q_i` and 0 modulo every other basis prime in the
    /// prefix.
    pub fn crt_unit_mod(&self, n: usize, i: usize, w: &Modulus) -> u64 {
        let mi_mod = biguint_mod_u64(&self.big_m[n][i], w.q());
        w.mul(w.reduce(self.garner[n][i]), mi_mod)
    }

    /// Exact CRT composition of one residue per prefix prime into a
    /// centered representative in `(-Q_n/2, Q_n/2]` where `n` is the
    /// number of residues given.
    pub fn compose_centered(&self, residues: &[u64]) -> BigInt {
        let n = residues.len();
        assert!(n >= 1 && n <= self.moduli.len());
        let q_n = &self.prefix_products[n];
        let mut acc = BigUint::zero();
        for i in 0..n {
            let c = self.moduli[i].mul(self.moduli[i].reduce(residues[i]), self.garner[n][i]);
            acc += &self.big_m[n][i] * c;
        }
        acc %= q_n;
        let half = q_n >> 1;
        if acc > half {
            BigInt::from(acc) - BigInt::from(q_n.clone())
        } else {
            BigInt::from(acc)
        }
    }

    /// Residues of an arbitrary big integer with respect to the first `n`
    /// primes.
    pub fn decompose(&self, x: &BigInt, n: usize) -> Vec<u64> {
        (0..n)
            .map(|i| {
                let q = self.moduli[i].q();
                let r = x % q;
                let r = if r < BigInt::zero() { r + q } else { r };
                let digits = r.to_biguint().unwrap().to_u64_digits();
                digits.first().copied().unwrap_or(0)
            })
            .collect()
    }
}

/// Remainder of a big unsigned integer by a word.
pub fn biguint_mod_u64(x: &BigUint, w: u64) -> u64 {
    let r = x % w;
    r.to_u64_digits().first().copied().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bit_length_basics() {
        assert_eq!(bit_length(0), 0);
        assert_eq!(bit_length(1), 1);
        assert_eq!(bit_length(2), 2);
        assert_eq!(bit_length(3), 2);
        assert_eq!(bit_length(u64::MAX), 64);
    }

    #[test]
    fn gcd_lcm_values() {
        assert_eq!(gcd(12, 18), 6);
        assert_eq!(lcm(4, 6), 12);
        // Padded transform step for ring index 91 with pad 256.
        assert_eq!(lcm(182, 256), 23296);
    }

    #[test]
    fn factorize_and_phi() {
        assert_eq!(factorize(91), vec![(7, 1), (13, 1)]);
        assert_eq!(factorize(256), vec![(2, 8)]);
        assert_eq!(factorize(1), vec![]);
        assert_eq!(euler_phi(91), 72);
        assert_eq!(euler_phi(121), 110);
        assert_eq!(euler_phi(31), 30);
        assert_eq!(euler_phi(257), 256);
        assert_eq!(euler_phi(771), 512);
        assert_eq!(euler_phi(255), 128);
        assert_eq!(euler_phi(171), 108);
        assert_eq!(euler_phi(133), 108);
        assert_eq!(euler_phi(61), 60);
    }

    #[test]
    fn mult_orders_of_plaintext_primes() {
        assert_eq!(mult_order(3, 91), 6);
        assert_eq!(mult_order(3, 121), 5);
        assert_eq!(mult_order(5, 31), 3);
        assert_eq!(mult_order(7, 61), 60);
        assert_eq!(mult_order(7, 171), 3);
        assert_eq!(mult_order(11, 133), 3);
        assert_eq!(mult_order(13, 255), 4);
        assert_eq!(mult_order(17, 257), 32);
        assert_eq!(mult_order(17, 771), 32);
    }

    #[test]
    fn miller_rabin_known_values() {
        assert!(miller_rabin(2));
        assert!(miller_rabin(3));
        assert!(!miller_rabin(1));
        assert!(!miller_rabin(0));
        assert!(miller_rabin(65537));
        assert!(!miller_rabin(65536));
        // Strong pseudoprime to several bases, caught by the full set.
        assert!(!miller_rabin(3215031751));
        // Carmichael number.
        assert!(!miller_rabin(561));
        assert!(miller_rabin((1u64 << 61) - 1));
    }

    #[test]
    fn smallest_20_bit_prime_congruent_1_mod_24() {
        // First three candidates at or above 2^19 that are 1 mod 24:
        // 524305 and 524329 are composite, 524353 is prime.
        assert_eq!((524305 - 1) % 24, 0);
        assert!(!miller_rabin(524305));
        assert!(!miller_rabin(524329));
        assert!(miller_rabin(524353));
        assert_eq!((524353 - 1) % 24, 0);
    }

    #[test]
    fn barrett_matches_u128_reference() {
        for q in [3u64, 524353, (1 << 45) - 229, (1 << 61) + 17 * 4] {
            if !miller_rabin(q) {
                continue;
            }
            let md = Modulus::new(q);
            let mut x: u64 = 123456789;
            for _ in 0..200 {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let a = x % q;
                let b = x.rotate_left(17) % q;
                assert_eq!(md.mul(a, b), (a as u128 * b as u128 % q as u128) as u64);
            }
        }
    }

    #[test]
    fn modular_ops() {
        let md = Modulus::new(17);
        assert_eq!(md.add(9, 12), 4);
        assert_eq!(md.sub(3, 9), 11);
        assert_eq!(md.neg(0), 0);
        assert_eq!(md.neg(5), 12);
        assert_eq!(md.pow(2, 0), 1);
        assert_eq!(md.pow(3, 16), 1);
        assert_eq!(md.mul(md.inv(5), 5), 1);
        assert_eq!(md.reduce_i64(-1), 16);
        assert_eq!(md.reduce_i64(-17), 0);
        assert_eq!(md.reduce_u128(1u128 << 100), ((1u128 << 100) % 17) as u64);
    }

    #[test]
    fn prime_generation_progression() {
        let primes = gen_primes_in_progression(24, 20, 3).unwrap();
        assert_eq!(primes.len(), 3);
        for &p in &primes {
            assert!(miller_rabin(p));
            assert_eq!(p % 24, 1);
            assert_eq!(bit_length(p), 20);
        }
        // Descending search from the top of the range.
        assert!(primes.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn ntt_prime_congruences() {
        let primes = gen_ntt_primes(91, 256, 45, 3).unwrap();
        for &p in &primes {
            assert_eq!(p % 23296, 1);
            assert_eq!(bit_length(p), 45);
        }
        let with_p = gen_ntt_primes_congruent(91, 256, 45, 3, 3).unwrap();
        for &p in &with_p {
            assert_eq!(p % 23296, 1);
            assert_eq!(p % 3, 1);
        }
    }

    #[test]
    fn ntt_prime_validation_errors() {
        assert!(matches!(
            gen_ntt_primes(90, 256, 45, 1),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            gen_ntt_primes(91, 128, 45, 1),
            Err(Error::BasisTooSmall { .. })
        ));
        assert!(matches!(
            gen_ntt_primes(91, 100, 45, 1),
            Err(Error::BasisTooSmall { .. })
        ));
    }

    #[test]
    fn not_enough_primes_is_reported() {
        // A 20-bit window cannot contain 10^4 primes in this progression.
        let err = gen_primes_in_progression(24, 20, 10_000).unwrap_err();
        match err {
            Error::NotEnoughPrimes { wanted, .. } => assert_eq!(wanted, 10_000),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn find_root_order_8_mod_17() {
        let md = Modulus::new(17);
        let g = find_root(8, &md).unwrap();
        // The primitive 8th roots modulo 17.
        assert!([2u64, 8, 9, 15].contains(&g), "got {g}");
        assert_eq!(md.pow(g, 8), 1);
        assert_ne!(md.pow(g, 4), 1);
        assert_ne!(md.pow(g, 2), 1);
    }

    #[test]
    fn find_root_rejects_non_dividing_order() {
        let md = Modulus::new(17);
        assert!(matches!(
            find_root(3, &md),
            Err(Error::OrderNotDividing { .. })
        ));
    }

    #[test]
    fn find_root_for_transform_primes() {
        let primes = gen_ntt_primes(91, 256, 45, 2).unwrap();
        for &p in &primes {
            let md = Modulus::new(p);
            let w = find_root(182, &md).unwrap();
            assert_eq!(md.pow(w, 182), 1);
            assert_ne!(md.pow(w, 91), 1);
            assert_ne!(md.pow(w, 182 / 7), 1);
            assert_ne!(md.pow(w, 182 / 13), 1);
            let psi = find_root(256, &md).unwrap();
            assert_eq!(md.pow(psi, 256), 1);
            assert_ne!(md.pow(psi, 128), 1);
        }
    }

    #[test]
    fn rns_basis_construction_and_units() {
        let primes = gen_ntt_primes(91, 256, 45, 3).unwrap();
        let basis = RnsBasis::new(&primes).unwrap();
        assert_eq!(basis.len(), 3);
        let q3 = basis.product_of(3).clone();
        assert_eq!(q3, primes.iter().map(|&p| BigUint::from(p)).product());
        // CRT units: 1 on their own prime, 0 on the others.
        for n in 1..=3usize {
            for i in 0..n {
                for j in 0..n {
                    let u = basis.crt_unit_mod(n, i, basis.modulus(j));
                    assert_eq!(u, if i == j { 1 } else { 0 });
                }
            }
        }
    }

    #[test]
    fn rns_basis_rejects_bad_input() {
        assert!(RnsBasis::new(&[]).is_err());
        assert!(RnsBasis::new(&[15]).is_err());
        assert!(RnsBasis::new(&[17, 17]).is_err());
    }

    #[test]
    fn compose_centered_round_trip() {
        let primes = gen_ntt_primes(91, 256, 30, 3).unwrap();
        let basis = RnsBasis::new(&primes).unwrap();
        for n in 1..=3usize {
            let q_n = basis.product_of(n).clone();
            let half = BigInt::from(q_n.clone() >> 1);
            let samples = [
                BigInt::zero(),
                BigInt::one(),
                -BigInt::one(),
                half.clone(),
                -(half.clone() - BigInt::one()),
                BigInt::from(123456u64),
            ];
            for x in samples {
                let res = basis.decompose(&x, n);
                let back = basis.compose_centered(&res);
                assert_eq!(back, x, "n = {n}");
            }
        }
    }

    proptest! {
        #[test]
        fn barrett_mul_matches_reference(q_sel in 0usize..6, a in any::<u64>(), b in any::<u64>()) {
            // Primes spanning the supported bit range, including both ends.
            let qs = [
                1048583u64 | 1,       // 21 bits (1048583 is prime)
                (1u64 << 30) - 35,    // 30 bits, prime
                (1u64 << 44) + 7,     // 45 bits, prime
                (1u64 << 52) + 21,    // 53 bits, prime
                (1u64 << 61) - 1,     // 61 bits, Mersenne prime
                4611686018427387847,  // 62 bits, prime
            ];
            let q = qs[q_sel];
            prop_assume!(miller_rabin(q));
            let md = Modulus::new(q);
            let a = a % q;
            let b = b % q;
            prop_assert_eq!(md.mul(a, b), (a as u128 * b as u128 % q as u128) as u64);
        }

        #[test]
        fn pow_matches_repeated_mul(a in 0u64..1000, e in 0u64..24) {
            let md = Modulus::new(524353);
            let mut acc = 1u64;
            for _ in 0..e {
                acc = md.mul(acc, md.reduce(a));
            }
            prop_assert_eq!(md.pow(a, e), acc);
        }

        #[test]
        fn compose_round_trips_random(res0 in any::<u64>(), res1 in any::<u64>(), res2 in any::<u64>()) {
            let primes = [536870923u64, 536871017, 536871119];
            let basis = RnsBasis::new(&primes).unwrap();
            let residues = [res0 % primes[0], res1 % primes[1], res2 % primes[2]];
            let x = basis.compose_centered(&residues);
            let back = basis.decompose(&x, 3);
            prop_assert_eq!(back.as_slice(), residues.as_slice());
            // Centered range.
            let q = BigInt::from(basis.product_of(3).clone());
            prop_assert!(x.clone() * 2 <= q.clone());
            prop_assert!(x * 2 > -q);
        }
    }
}
