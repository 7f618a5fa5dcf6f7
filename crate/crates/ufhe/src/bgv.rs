//! Leveled BGV encryption over the non-power-of-two cyclotomic ring.
//!
//! Ciphertexts are pairs of double-CRT ring elements over a shrinking
//! prefix of the RNS prime chain. Every ciphertext carries an exact
//! upper bound on the magnitude of its centered phase
//! `c0 + c1 * s mod Q` (plaintext plus noise together), maintained with
//! big-integer arithmetic; `decrypt` refuses to proceed once the bound
//! reaches the level's threshold, so silent corruption is impossible as
//! long as the bound is sound (which dedicated tests check against the
//! measured phase).
//!
//! All RNS primes are congruent to 1 modulo both the transform step and
//! the plaintext prime `p`; the latter makes modulus switching leave the
//! plaintext untouched without a correction step. Key switching
//! decomposes every residue into 16-bit sub-digits; the keys embed the
//! CRT units of the full chain scaled by the sub-digit powers, and those
//! units act as the correct units on every prefix, so one key set serves
//! all levels.

use std::collections::HashMap;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};

use crate::arith::{biguint_mod_u64, Modulus, RnsBasis};
use crate::error::{Error, Result};
use crate::metrics::{Category, ScopedTimer};
use crate::plainspace::PlainSpace;
use crate::ring::{Rep, RingContext, RingElem};
use crate::rng::{SplitRng, ERROR_CUT};
use crate::transform::{next_pow2_at_least, PlanCache};

/// Width of one key-switching sub-digit. Residues are decomposed into
/// pieces of this many bits before hitting the switching key, which
/// caps the injected noise at `nC * p * B_e * 2^16` per row — far below
/// any chain prime — so rotations and relinearizations stay cheap in
/// noise even though they do not consume a level.
pub const KSW_DIGIT_BITS: u32 = 16;

/// Scheme parameters: plaintext prime, ring index, level count, and the
/// bit size of each RNS prime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BgvParams {
    /// Plaintext modulus (an odd prime not dividing m).
    pub p: u64,
    /// Ring index; the ring is Z[x]/Phi_m.
    pub m: u64,
    /// Number of modulus switches available; the prime chain has
    /// `levels + 1` primes and a fresh ciphertext sits at `level = levels`.
    pub levels: usize,
    /// Bit size of every chain prime (20..=62).
    pub prime_bits: u32,
}

/// Everything shared by ciphertexts of one parameter set.
#[derive(Debug)]
pub struct BgvContext {
    params: BgvParams,
    plain: Arc<PlainSpace>,
    ring: Arc<RingContext>,
    p_md: Modulus,
    /// n * C_m: worst-case coefficient expansion of one ring product.
    ring_expansion: BigUint,
    /// Worst-case coefficient expansion of a Galois automorphism.
    galois_expansion: BigUint,
    /// Error-coefficient bound (the sampler's cut).
    b_err: BigUint,
    /// (p - 1) / 2.
    half_p: BigUint,
}

/// A plaintext polynomial: n coefficients reduced modulo p.
pub type Plaintext = Vec<u64>;

impl BgvContext {
    /// Builds the context: plaintext algebra, prime chain, transform
    /// plans, and the expansion constants used by noise accounting.
    pub fn new(params: BgvParams, cache: &PlanCache) -> Result<Arc<Self>> {
        let plain = Arc::new(PlainSpace::build(params.p, params.m)?);
        let pad = next_pow2_at_least(2 * params.m - 1);
        let primes = crate::arith::gen_ntt_primes_congruent(
            params.m,
            pad,
            params.prime_bits,
            params.levels + 1,
            params.p,
        )?;
        let basis = Arc::new(RnsBasis::new(&primes)?);
        let ring = RingContext::new(params.m, basis, cache)?;
        let n = ring.n();

        let (c_mul, c_gal) = expansion_constants(params.m, n);
        let ring_expansion = BigUint::from(n as u64) * c_mul;
        let galois_expansion = c_gal;

        Ok(Arc::new(Self {
            p_md: Modulus::new(params.p),
            params,
            plain,
            ring,
            ring_expansion,
            galois_expansion,
            b_err: BigUint::from(ERROR_CUT as u64),
            half_p: BigUint::from((params.p - 1) / 2),
        }))
    }

    /// The parameter set.
    pub fn params(&self) -> &BgvParams {
        &self.params
    }

    /// The plaintext slot algebra.
    pub fn plain(&self) -> &Arc<PlainSpace> {
        &self.plain
    }

    /// The ring context.
    pub fn ring(&self) -> &Arc<RingContext> {
        &self.ring
    }

    /// Number of SIMD slots.
    pub fn slots(&self) -> usize {
        self.plain.slots()
    }

    /// The n * C_m product-expansion constant.
    pub fn ring_expansion(&self) -> &BigUint {
        &self.ring_expansion
    }

    /// Decryption threshold at a level: Q_level / (2p).
    pub fn threshold(&self, level: usize) -> BigUint {
        let q = self.ring.basis().product_of(level + 1);
        q / (2 * self.params.p)
    }

    /// Phase bound of a fresh encryption.
    pub fn fresh_noise_bound(&self) -> BigUint {
        // p * (2 * B_e * nC + B_e) + (p - 1)/2.
        let two_terms = BigUint::from(2u32) * &self.b_err * &self.ring_expansion + &self.b_err;
        BigUint::from(self.params.p) * two_terms + &self.half_p
    }

    /// Generates a secret / public key pair.
    pub fn keygen(&self, rng: &mut SplitRng) -> (SecretKey, PublicKey) {
        let full = self.ring.max_levels();
        let mut key_rng = rng.split("secret-key");
        let mut s = RingElem::random_ternary(&self.ring, full, &mut key_rng);
        s.to_eval().expect("fresh ternary converts");
        let mut pk_rng = rng.split("public-key");
        let a = RingElem::random_uniform(&self.ring, full, &mut pk_rng);
        let (e, _) = RingElem::random_error(&self.ring, full, &mut pk_rng);
        let mut e = e;
        e.to_eval().expect("error converts");
        // b = -a*s + p*e.
        let b = a
            .mul(&s)
            .expect("same rep")
            .neg()
            .add(&e.mul_scalar(self.params.p))
            .expect("same rep");
        (SecretKey { s }, PublicKey { b, a })
    }

    /// Generates the relinearization key (key-switching s^2 -> s).
    pub fn gen_relin_key(&self, sk: &SecretKey, rng: &mut SplitRng) -> KswKey {
        let s2 = sk.s.mul(&sk.s).expect("eval rep");
        self.gen_ksw_key(sk, &s2, rng)
    }

    /// Generates Galois keys for the listed automorphism exponents.
    pub fn gen_galois_keys(
        &self,
        sk: &SecretKey,
        elements: &[u64],
        rng: &mut SplitRng,
    ) -> Result<GaloisKeys> {
        let mut keys = HashMap::new();
        let mut perms = HashMap::new();
        for &t in elements {
            let perm = self.ring.automorphism_perm(t)?;
            let s_t = sk.s.apply_perm(&perm)?;
            keys.insert(t, self.gen_ksw_key(sk, &s_t, rng));
            perms.insert(t, perm);
        }
        Ok(GaloisKeys { keys, perms })
    }

    /// Sub-digit count for chain prime `i` under the 16-bit gadget.
    fn ksw_digits(&self, i: usize) -> usize {
        let bits = self.ring.basis().modulus(i).bits();
        ((bits + KSW_DIGIT_BITS - 1) / KSW_DIGIT_BITS) as usize
    }

    /// Builds a key-switching key taking (a component decrypted under)
    /// `target` to the secret `s`: one row per chain prime and 16-bit
    /// sub-digit, with the CRT unit and the digit scale folded into the
    /// `b` part.
    fn gen_ksw_key(&self, sk: &SecretKey, target: &RingElem, rng: &mut SplitRng) -> KswKey {
        let full = self.ring.max_levels();
        let basis = self.ring.basis();
        let mut rows = Vec::with_capacity(full);
        let mut krng = rng.split("ksw");
        for i in 0..full {
            let mut prime_rows = Vec::with_capacity(self.ksw_digits(i));
            for d in 0..self.ksw_digits(i) {
                let a_i = RingElem::random_uniform(&self.ring, full, &mut krng);
                let (mut e_i, _) = RingElem::random_error(&self.ring, full, &mut krng);
                e_i.to_eval().expect("error converts");
                // unit_i * 2^(16 d) * target, reduced per chain prime.
                let mut unit_tgt = target.clone();
                for j in 0..full {
                    let md = basis.modulus(j);
                    let scale = md.mul(
                        basis.crt_unit_mod(full, i, md),
                        md.reduce_u128(1u128 << (KSW_DIGIT_BITS as usize * d)),
                    );
                    let row = unit_tgt.row_mut(j);
                    for v in row.iter_mut() {
                        *v = md.mul(*v, scale);
                    }
                }
                let b_i = a_i
                    .mul(&sk.s)
                    .expect("same rep")
                    .neg()
                    .add(&e_i.mul_scalar(self.params.p))
                    .expect("same rep")
                    .add(&unit_tgt)
                    .expect("same rep");
                prime_rows.push((b_i, a_i));
            }
            rows.push(prime_rows);
        }
        KswKey { rows }
    }

    /// Encrypts a plaintext polynomial (n coefficients modulo p) at the
    /// top level.
    pub fn encrypt(&self, pk: &PublicKey, pt: &[u64], rng: &mut SplitRng) -> Result<Ciphertext> {
        self.encrypt_at_level(pk, pt, self.params.levels, rng)
    }

    /// Encrypts at a chosen level (level + 1 active primes).
    pub fn encrypt_at_level(
        &self,
        pk: &PublicKey,
        pt: &[u64],
        level: usize,
        rng: &mut SplitRng,
    ) -> Result<Ciphertext> {
        if level >= self.ring.max_levels() {
            return Err(Error::LevelMismatch {
                left: level,
                right: self.ring.max_levels() - 1,
            });
        }
        let active = level + 1;
        let pt_elem = self.plaintext_elem(pt, active)?;
        let mut erng = rng.split("encrypt");
        let mut u = RingElem::random_ternary(&self.ring, active, &mut erng);
        u.to_eval()?;
        let (mut e0, _) = RingElem::random_error(&self.ring, active, &mut erng);
        let (mut e1, _) = RingElem::random_error(&self.ring, active, &mut erng);
        e0.to_eval()?;
        e1.to_eval()?;
        let mut b = pk.b.clone();
        b.truncate_levels(active)?;
        let mut a = pk.a.clone();
        a.truncate_levels(active)?;
        let p = self.params.p;
        let c0 = b
            .mul(&u)?
            .add(&e0.mul_scalar(p))?
            .add(&pt_elem)?;
        let c1 = a.mul(&u)?.add(&e1.mul_scalar(p))?;
        Ok(Ciphertext {
            c0,
            c1,
            level,
            noise: self.fresh_noise_bound(),
        })
    }

    /// Lifts a plaintext polynomial into the ring with centered
    /// coefficients, in evaluation form over `active` primes.
    fn plaintext_elem(&self, pt: &[u64], active: usize) -> Result<RingElem> {
        if pt.len() != self.ring.n() {
            return Err(Error::BadLength {
                expected: self.ring.n(),
                got: pt.len(),
                context: "plaintext polynomial",
            });
        }
        let p = self.params.p;
        let centered: Vec<i64> = pt
            .iter()
            .map(|&c| {
                let c = c % p;
                if c > p / 2 {
                    c as i64 - p as i64
                } else {
                    c as i64
                }
            })
            .collect();
        let mut elem = RingElem::from_signed_coeffs(&self.ring, &centered, active)?;
        elem.to_eval()?;
        Ok(elem)
    }

    /// Checked decryption: refuses when the tracked phase bound has
    /// reached the level threshold.
    pub fn decrypt(&self, sk: &SecretKey, ct: &Ciphertext) -> Result<Plaintext> {
        let threshold = self.threshold(ct.level);
        if ct.noise >= threshold {
            return Err(Error::NoiseBudgetExhausted {
                bound_bits: ct.noise.bits(),
                threshold_bits: threshold.bits(),
            });
        }
        Ok(self.decrypt_unchecked(sk, ct))
    }

    /// Decryption without the bound check (used by soundness tests).
    pub fn decrypt_unchecked(&self, sk: &SecretKey, ct: &Ciphertext) -> Plaintext {
        let phase = self.phase_coeffs(sk, ct);
        let p = self.params.p as i64;
        phase
            .iter()
            .map(|c| {
                let r = (c % p + p) % p;
                let digits = r.to_biguint().unwrap_or_default().to_u64_digits();
                digits.first().copied().unwrap_or(0)
            })
            .collect()
    }

    /// Centered coefficients of `c0 + c1 * s` over the active prefix.
    fn phase_coeffs(&self, sk: &SecretKey, ct: &Ciphertext) -> Vec<BigInt> {
        let active = ct.level + 1;
        let mut s = sk.s.clone();
        s.truncate_levels(active).expect("secret covers all levels");
        let mut inner = ct
            .c0
            .add(&ct.c1.mul(&s).expect("same rep"))
            .expect("same rep");
        inner.to_coeff().expect("convertible");
        inner.compose_coeffs_centered().expect("coeff rep")
    }

    /// Measured infinity norm of the phase; the tracked bound must always
    /// dominate this.
    pub fn measured_phase_norm(&self, sk: &SecretKey, ct: &Ciphertext) -> BigUint {
        self.phase_coeffs(sk, ct)
            .iter()
            .map(|c| c.abs().to_biguint().unwrap())
            .max()
            .unwrap_or_else(BigUint::zero)
    }

    /// Remaining noise budget in bits: floor(log2(threshold / bound)).
    pub fn noise_budget(&self, ct: &Ciphertext) -> u64 {
        let threshold = self.threshold(ct.level);
        if ct.noise >= threshold || ct.noise.is_zero() {
            return 0;
        }
        let ratio = threshold / &ct.noise;
        ratio.bits().saturating_sub(1)
    }

    /// Homomorphic addition.
    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.check_levels(a, b)?;
        Ok(Ciphertext {
            c0: a.c0.add(&b.c0)?,
            c1: a.c1.add(&b.c1)?,
            level: a.level,
            noise: &a.noise + &b.noise,
        })
    }

    /// Homomorphic subtraction.
    pub fn sub(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.check_levels(a, b)?;
        Ok(Ciphertext {
            c0: a.c0.sub(&b.c0)?,
            c1: a.c1.sub(&b.c1)?,
            level: a.level,
            noise: &a.noise + &b.noise,
        })
    }

    /// Adds an encoded plaintext polynomial.
    pub fn add_plain(&self, a: &Ciphertext, pt: &[u64]) -> Result<Ciphertext> {
        let pt_elem = self.plaintext_elem(pt, a.level + 1)?;
        Ok(Ciphertext {
            c0: a.c0.add(&pt_elem)?,
            c1: a.c1.clone(),
            level: a.level,
            noise: &a.noise + &self.half_p,
        })
    }

    /// Subtracts an encoded plaintext polynomial.
    pub fn sub_plain(&self, a: &Ciphertext, pt: &[u64]) -> Result<Ciphertext> {
        let pt_elem = self.plaintext_elem(pt, a.level + 1)?;
        Ok(Ciphertext {
            c0: a.c0.sub(&pt_elem)?,
            c1: a.c1.clone(),
            level: a.level,
            noise: &a.noise + &self.half_p,
        })
    }

    /// Multiplies by an encoded plaintext polynomial (a scalar multiply:
    /// no relinearization, no level drop).
    pub fn mul_plain(&self, a: &Ciphertext, pt: &[u64]) -> Result<Ciphertext> {
        let pt_elem = self.plaintext_elem(pt, a.level + 1)?;
        let noise = &a.noise * &self.half_p * &self.ring_expansion;
        Ok(Ciphertext {
            c0: a.c0.mul(&pt_elem)?,
            c1: a.c1.mul(&pt_elem)?,
            level: a.level,
            noise,
        })
    }

    /// Multiplies by a small integer constant `c` modulo p. The multiply
    /// is realized with the centered representative of `c` so the phase
    /// grows by at most (p-1)/2.
    pub fn mul_scalar(&self, a: &Ciphertext, c: u64) -> Ciphertext {
        let c = c % self.params.p;
        let (factor, negate) = if c > self.params.p / 2 {
            (self.params.p - c, true)
        } else {
            (c, false)
        };
        let mut c0 = a.c0.mul_scalar(factor);
        let mut c1 = a.c1.mul_scalar(factor);
        if negate {
            c0 = c0.neg();
            c1 = c1.neg();
        }
        Ciphertext {
            c0,
            c1,
            level: a.level,
            noise: &a.noise * BigUint::from(factor.max(1)),
        }
    }

    /// Negates a ciphertext.
    pub fn neg(&self, a: &Ciphertext) -> Ciphertext {
        Ciphertext {
            c0: a.c0.neg(),
            c1: a.c1.neg(),
            level: a.level,
            noise: a.noise.clone(),
        }
    }

    fn check_levels(&self, a: &Ciphertext, b: &Ciphertext) -> Result<()> {
        if a.level != b.level {
            return Err(Error::LevelMismatch {
                left: a.level,
                right: b.level,
            });
        }
        Ok(())
    }

    /// Full homomorphic multiplication: tensor, relinearize with `rlk`,
    /// then switch down one level.
    pub fn he_mul(&self, rlk: &KswKey, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.check_levels(a, b)?;
        if a.level == 0 {
            // The mandatory switch after relinearization needs a level.
            return Err(Error::OutOfLevels);
        }
        let _t = ScopedTimer::new(Category::Elementwise);
        // Tensor.
        let d0 = a.c0.mul(&b.c0)?;
        let d1 = a.c0.mul(&b.c1)?.add(&a.c1.mul(&b.c0)?)?;
        let d2 = a.c1.mul(&b.c1)?;
        // Phase bound of the tensor: nC * (Ba * Bb).
        let tensor_noise = &self.ring_expansion * &a.noise * &b.noise;
        // Relinearize d2 down onto (c0, c1).
        let (r0, r1, ks_noise) = self.key_switch(rlk, &d2, a.level)?;
        let ct = Ciphertext {
            c0: d0.add(&r0)?,
            c1: d1.add(&r1)?,
            level: a.level,
            noise: tensor_noise + ks_noise,
        };
        self.mod_switch(&ct)
    }

    /// Applies the key-switching key to `target` (a ring element that
    /// multiplies the key's hidden secret), producing the two output
    /// components and the additive phase-bound term.
    fn key_switch(
        &self,
        key: &KswKey,
        target: &RingElem,
        level: usize,
    ) -> Result<(RingElem, RingElem, BigUint)> {
        let active = level + 1;
        if key.rows.len() < active {
            return Err(Error::BasisMismatch {
                context: "key-switching key shorter than the active chain",
            });
        }
        // Digit decomposition needs the coefficient rows of the target.
        let mut tgt = target.clone();
        tgt.to_coeff()?;
        let mut acc0 = RingElem::zero(&self.ring, active, Rep::Eval);
        let mut acc1 = RingElem::zero(&self.ring, active, Rep::Eval);
        let mask = (1u64 << KSW_DIGIT_BITS) - 1;
        // Additive term: nC * p * B_e * (2^16 - 1) per processed row.
        let per_row = &self.ring_expansion
            * BigUint::from(self.params.p)
            * &self.b_err
            * BigUint::from(mask);
        let mut rows_used = 0u64;
        for i in 0..active {
            let digit_row = tgt.row(i).to_vec();
            for (d, (kb, ka)) in key.rows[i].iter().enumerate() {
                // 16-bit sub-digit of every residue, lifted to the
                // active primes (it is smaller than each of them).
                let sub: Vec<u64> = digit_row
                    .iter()
                    .map(|&v| (v >> (KSW_DIGIT_BITS as usize * d)) & mask)
                    .collect();
                if sub.iter().all(|&v| v == 0) {
                    continue;
                }
                let mut rows = Vec::with_capacity(active);
                for j in 0..active {
                    rows.push(self.ring.plan(j).to_eval(&sub)?);
                }
                let d_i = RingElem::from_rows(&self.ring, Rep::Eval, rows)?;
                let mut b_i = kb.clone();
                b_i.truncate_levels(active)?;
                let mut a_i = ka.clone();
                a_i.truncate_levels(active)?;
                acc0 = acc0.add(&d_i.mul(&b_i)?)?;
                acc1 = acc1.add(&d_i.mul(&a_i)?)?;
                rows_used += 1;
            }
        }
        let ks_noise = per_row * BigUint::from(rows_used.max(1));
        Ok((acc0, acc1, ks_noise))
    }

    /// Switches a ciphertext down one level, dividing the phase (and its
    /// bound) by the dropped prime.
    pub fn mod_switch(&self, ct: &Ciphertext) -> Result<Ciphertext> {
        if ct.level == 0 {
            return Err(Error::OutOfLevels);
        }
        let _t = ScopedTimer::new(Category::Crt);
        let active = ct.level + 1;
        let drop_idx = active - 1;
        let q_drop = self.ring.basis().modulus(drop_idx).q();
        let c0 = self.switch_elem(&ct.c0, drop_idx, q_drop)?;
        let c1 = self.switch_elem(&ct.c1, drop_idx, q_drop)?;
        // B' = B / q + (p + 1)/2 * (1 + nC) + 1.
        let delta_term =
            BigUint::from((self.params.p + 1) / 2) * (BigUint::one() + &self.ring_expansion);
        let noise = &ct.noise / q_drop + delta_term + BigUint::one();
        Ok(Ciphertext {
            c0,
            c1,
            level: ct.level - 1,
            noise,
        })
    }

    /// Core of the modulus switch for one component: removes the last
    /// active row, subtracting the correction delta = v + q_drop * w with
    /// v the centered dropped residues and w chosen so delta is divisible
    /// by p... precisely so delta ≡ 0 (mod p) and ≡ the component
    /// (mod q_drop), then divides by q_drop.
    fn switch_elem(&self, elem: &RingElem, drop_idx: usize, q_drop: u64) -> Result<RingElem> {
        let n = self.ring.n();
        let p = self.params.p;
        // Dropped row in coefficient form.
        let drop_coeffs = self
            .ring
            .plan(drop_idx)
            .from_eval(elem.row(drop_idx))?;
        // v centered in (-q/2, q/2]; w = centered(-v / q_drop mod p).
        let p_md = &self.p_md;
        let q_inv_mod_p = p_md.inv(p_md.reduce(q_drop));
        let mut delta = Vec::with_capacity(n);
        for &vr in drop_coeffs.iter() {
            let v: i128 = if vr > q_drop / 2 {
                vr as i128 - q_drop as i128
            } else {
                vr as i128
            };
            let v_mod_p = p_md.reduce_i64((v % p as i128) as i64);
            let w_mod = p_md.mul(p_md.neg(v_mod_p), q_inv_mod_p);
            let w: i128 = if w_mod > p / 2 {
                w_mod as i128 - p as i128
            } else {
                w_mod as i128
            };
            delta.push(v + q_drop as i128 * w);
        }
        // New rows: (row_j - delta) * q_drop^{-1} per remaining prime.
        let mut rows = Vec::with_capacity(drop_idx);
        for j in 0..drop_idx {
            let md = self.ring.basis().modulus(j);
            let qd_inv = md.inv(md.reduce(q_drop));
            // delta reduced into [0, q_j), then transformed to eval.
            let delta_mod: Vec<u64> = delta
                .iter()
                .map(|&d| {
                    let r = d.rem_euclid(md.q() as i128);
                    r as u64
                })
                .collect();
            let delta_eval = self.ring.plan(j).to_eval(&delta_mod)?;
            let row = elem.row(j);
            let new_row: Vec<u64> = row
                .iter()
                .zip(delta_eval.iter())
                .map(|(&c, &d)| md.mul(md.sub(c, d), qd_inv))
                .collect();
            rows.push(new_row);
        }
        RingElem::from_rows(&self.ring, Rep::Eval, rows)
    }

    /// Brings both ciphertexts to the lower of the two levels.
    pub fn align_levels(&self, a: &Ciphertext, b: &Ciphertext) -> Result<(Ciphertext, Ciphertext)> {
        let mut a = a.clone();
        let mut b = b.clone();
        while a.level > b.level {
            a = self.mod_switch(&a)?;
        }
        while b.level > a.level {
            b = self.mod_switch(&b)?;
        }
        Ok((a, b))
    }

    /// Applies the Galois map `f(x) -> f(x^t)` homomorphically: permutes
    /// both components, then key-switches the c1 part back under `s`.
    pub fn apply_galois(
        &self,
        gk: &GaloisKeys,
        ct: &Ciphertext,
        t: u64,
    ) -> Result<Ciphertext> {
        let key = gk.keys.get(&t).ok_or(Error::MissingGaloisKey { element: t })?;
        let perm = gk.perms.get(&t).ok_or(Error::MissingGaloisKey { element: t })?;
        let c0_rot = ct.c0.apply_perm(perm)?;
        let c1_rot = ct.c1.apply_perm(perm)?;
        let (r0, r1, ks_noise) = self.key_switch(key, &c1_rot, ct.level)?;
        // The automorphism expands coefficients by at most the Galois
        // constant; the key switch adds its usual term.
        let noise = &ct.noise * &self.galois_expansion + ks_noise;
        Ok(Ciphertext {
            c0: c0_rot.add(&r0)?,
            c1: r1,
            level: ct.level,
            noise,
        })
    }

    /// Encodes per-slot scalars and encrypts.
    pub fn encrypt_slots(
        &self,
        pk: &PublicKey,
        vals: &[u64],
        rng: &mut SplitRng,
    ) -> Result<Ciphertext> {
        let pt = self.plain.encode_scalars(vals)?;
        self.encrypt(pk, &pt, rng)
    }

    /// Decrypts and decodes per-slot scalars.
    pub fn decrypt_slots(&self, sk: &SecretKey, ct: &Ciphertext) -> Result<Vec<u64>> {
        let pt = self.decrypt(sk, ct)?;
        self.plain.decode_scalars(&pt)
    }

    /// A noiseless "trivial" ciphertext whose value is the given
    /// plaintext; useful as an arithmetic identity.
    pub fn trivial(&self, pt: &[u64], level: usize) -> Result<Ciphertext> {
        let active = level + 1;
        let pt_elem = self.plaintext_elem(pt, active)?;
        Ok(Ciphertext {
            c0: pt_elem,
            c1: RingElem::zero(&self.ring, active, Rep::Eval),
            level,
            noise: self.half_p.clone() + BigUint::one(),
        })
    }
}

/// Integer reduction data for the noise model: returns `(C_mul, C_gal)`
/// where `C_mul = 1 + max_col sum_t |row_t[col]|` over the reduction rows
/// for `x^(n+t)`, `t = 0..n-2`, and `C_gal` is the same with the rows
/// restricted to `t < m - n` plus the monomial contribution.
fn expansion_constants(m: u64, n: usize) -> (BigUint, BigUint) {
    let phi = int_cyclotomic(m);
    debug_assert_eq!(phi.len(), n + 1);
    let rows_needed = n - 1;
    let mut col_sum_all = vec![0i128; n];
    let mut col_sum_low = vec![0i128; n];
    let mut row: Vec<i128> = (0..n).map(|i| -(phi[i] as i128)).collect();
    for t in 0..rows_needed {
        for (i, &v) in row.iter().enumerate() {
            col_sum_all[i] += v.abs();
            if t < (m as usize) - n {
                col_sum_low[i] += v.abs();
            }
        }
        // Multiply by x modulo Phi.
        let top = row[n - 1];
        for i in (1..n).rev() {
            row[i] = row[i - 1];
        }
        row[0] = 0;
        if top != 0 {
            for i in 0..n {
                row[i] += top * -(phi[i] as i128);
            }
        }
    }
    let c_mul = 1 + col_sum_all.iter().copied().max().unwrap_or(0);
    let c_gal = 1 + col_sum_low.iter().copied().max().unwrap_or(0);
    (
        BigUint::from(c_mul as u128),
        BigUint::from(c_gal as u128),
    )
}

/// Cyclotomic polynomial over the integers (coefficients fit i64 for the
/// supported ring sizes).
fn int_cyclotomic(m: u64) -> Vec<i64> {
    // Phi_m = prod_{d | m} (x^d - 1)^{mu(m/d)}, realized as exact integer
    // polynomial multiplication and division.
    let factors = crate::arith::factorize(m);
    let primes: Vec<u64> = factors.iter().map(|&(p, _)| p).collect();
    let radical: u64 = primes.iter().product();
    let t = primes.len();
    let mut num: Vec<Vec<i64>> = vec![x_pow_minus_1(radical)];
    let mut den: Vec<Vec<i64>> = Vec::new();
    for subset in 1u64..(1 << t) {
        let mut d = radical;
        for (i, &p) in primes.iter().enumerate() {
            if subset >> i & 1 == 1 {
                d /= p;
            }
        }
        if subset.count_ones() % 2 == 0 {
            num.push(x_pow_minus_1(d));
        } else {
            den.push(x_pow_minus_1(d));
        }
    }
    let mut acc = vec![1i64];
    for f in num {
        acc = int_poly_mul(&acc, &f);
    }
    for f in den {
        acc = int_poly_div_exact(&acc, &f);
    }
    let stretch = (m / radical) as usize;
    if stretch > 1 {
        let mut out = vec![0i64; (acc.len() - 1) * stretch + 1];
        for (i, &c) in acc.iter().enumerate() {
            out[i * stretch] = c;
        }
        acc = out;
    }
    acc
}

fn x_pow_minus_1(d: u64) -> Vec<i64> {
    let mut v = vec![0i64; d as usize + 1];
    v[0] = -1;
    v[d as usize] = 1;
    v
}

fn int_poly_mul(a: &[i64], b: &[i64]) -> Vec<i64> {
    let mut out = vec![0i64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = out[i + j].checked_add(x.checked_mul(y).expect("overflow")).expect("overflow");
        }
    }
    out
}

fn int_poly_div_exact(a: &[i64], b: &[i64]) -> Vec<i64> {
    let mut rem = a.to_vec();
    let db = b.len() - 1;
    assert_eq!(b[db], 1);
    let dq = rem.len() - 1 - db;
    let mut q = vec![0i64; dq + 1];
    for k in (0..=dq).rev() {
        let c = rem[k + db];
        q[k] = c;
        if c != 0 {
            for (j, &bj) in b.iter().enumerate() {
                rem[k + j] -= c * bj;
            }
        }
    }
    assert!(rem.iter().all(|&c| c == 0), "inexact division");
    q
}

/// The ternary secret key (evaluation form, full chain).
pub struct SecretKey {
    pub(crate) s: RingElem,
}

/// The public encryption key `(b, a)` with `b = -a s + p e`.
pub struct PublicKey {
    pub(crate) b: RingElem,
    pub(crate) a: RingElem,
}

/// A key-switching key: for chain prime `i` and sub-digit `j`, row
/// `rows[i][j]` hides `target * unit_i * 2^(16 j)`, so decomposing a
/// residue into 16-bit pieces keeps the switching noise independent of
/// the prime size.
pub struct KswKey {
    rows: Vec<Vec<(RingElem, RingElem)>>,
}

/// Galois keys plus the evaluation-domain permutation for each element.
pub struct GaloisKeys {
    keys: HashMap<u64, KswKey>,
    perms: HashMap<u64, Vec<usize>>,
}

impl GaloisKeys {
    /// The automorphism exponents with keys available.
    pub fn elements(&self) -> Vec<u64> {
        let mut v: Vec<u64> = self.keys.keys().copied().collect();
        v.sort_unstable();
        v
    }
}

/// A BGV ciphertext: two ring components, the level, and the phase bound.
#[derive(Clone)]
pub struct Ciphertext {
    pub(crate) c0: RingElem,
    pub(crate) c1: RingElem,
    level: usize,
    noise: BigUint,
}

impl std::fmt::Debug for Ciphertext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ciphertext")
            .field("level", &self.level)
            .field("noise_bits", &self.noise.bits())
            .finish_non_exhaustive()
    }
}

impl PartialEq for Ciphertext {
    /// Bit-exact equality: identical components, level, and bound.
    fn eq(&self, other: &Self) -> bool {
        self.level == other.level
            && self.noise == other.noise
            && self.c0 == other.c0
            && self.c1 == other.c1
    }
}

impl Eq for Ciphertext {}

impl Ciphertext {
    /// Current level (active primes minus one).
    pub fn level(&self) -> usize {
        self.level
    }

    /// The tracked phase bound.
    pub fn noise_bound(&self) -> &BigUint {
        &self.noise
    }

    /// Reassembles a ciphertext from its stored parts (deserialization).
    pub(crate) fn from_parts(c0: RingElem, c1: RingElem, level: usize, noise: BigUint) -> Self {
        Self {
            c0,
            c1,
            level,
            noise,
        }
    }
}

/// Reduces a big integer modulo a word, used by serialization.
pub(crate) fn _bigint_mod(x: &BigUint, q: u64) -> u64 {
    biguint_mod_u64(x, q)
}
