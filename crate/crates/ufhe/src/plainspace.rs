//! Plaintext slot algebra: the CRT structure of `F_p[x] / Phi_m(x)`.
//!
//! With `p` prime and coprime to `m`, `Phi_m` factors over `F_p` into
//! `l = n / d` distinct irreducible polynomials of degree `d`, where `d`
//! is the multiplicative order of `p` modulo `m`. Each factor contributes
//! one SIMD slot isomorphic to the field `F_{p^d}`. This module builds
//! that structure explicitly and deterministically:
//!
//! * a degree-`d` irreducible `g` defines the slot field `F_p[y]/(g)`;
//! * a primitive m-th root of unity `zeta` in that field pins down the
//!   factor `f_i(x) = prod_{j in C_i} (x - zeta^j)` for each coset `C_i`
//!   of `<p>` in `(Z/m)^*`;
//! * CRT idempotents and per-slot coordinate matrices give O(n d) encode
//!   and decode between slot values and polynomial coefficients.
//!
//! Cosets are ordered by their smallest member, ascending; slot `i`
//! corresponds to the coset with the `i`-th smallest representative, and
//! the slot value of a polynomial `f` is `f(zeta^{rep_i})`.

use num_bigint::BigUint;
use num_traits::One;

use crate::arith::{gcd, factorize, miller_rabin, Modulus};
use crate::error::{Error, Result};
use crate::rng::SplitRng;
use crate::transform::cyclotomic_mod_q;

/// The slot field `F_p[y] / (g)` with `g` monic irreducible of degree d.
///
/// Elements are coefficient vectors of length `d`, lowest power of `y`
/// first, entries reduced modulo `p`.
#[derive(Debug, Clone)]
pub struct SlotField {
    md: Modulus,
    d: usize,
    /// Monic modulus polynomial, length d + 1.
    g: Vec<u64>,
}

impl SlotField {
    fn new(md: Modulus, g: Vec<u64>) -> Self {
        let d = g.len() - 1;
        debug_assert_eq!(g[d], 1);
        Self { md, d, g }
    }

    /// Field characteristic p.
    pub fn p(&self) -> u64 {
        self.md.q()
    }

    /// Extension degree d.
    pub fn d(&self) -> usize {
        self.d
    }

    /// The defining polynomial, monic, length d + 1.
    pub fn modulus_poly(&self) -> &[u64] {
        &self.g
    }

    /// The zero element.
    pub fn zero(&self) -> Vec<u64> {
        vec![0; self.d]
    }

    /// The one element.
    pub fn one(&self) -> Vec<u64> {
        let mut v = vec![0; self.d];
        v[0] = 1;
        v
    }

    /// Embeds a base-field scalar.
    pub fn from_scalar(&self, c: u64) -> Vec<u64> {
        let mut v = vec![0; self.d];
        v[0] = self.md.reduce(c);
        v
    }

    /// True if all coordinates are zero.
    pub fn is_zero(&self, a: &[u64]) -> bool {
        a.iter().all(|&c| c == 0)
    }

    /// Sum of two elements.
    pub fn add(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter()
            .zip(b.iter())
            .map(|(&x, &y)| self.md.add(x, y))
            .collect()
    }

    /// Difference of two elements.
    pub fn sub(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter()
            .zip(b.iter())
            .map(|(&x, &y)| self.md.sub(x, y))
            .collect()
    }

    /// Product of two elements (schoolbook, then reduction by g).
    pub fn mul(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        debug_assert!(a.len() == self.d && b.len() == self.d);
        let mut t = vec![0u64; 2 * self.d - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                t[i + j] = self.md.add(t[i + j], self.md.mul(x, y));
            }
        }
        self.reduce(t)
    }

    fn reduce(&self, mut t: Vec<u64>) -> Vec<u64> {
        // Fold powers y^(d + k) down using y^d = -(g - y^d).
        for k in (self.d..t.len()).rev() {
            let c = t[k];
            if c == 0 {
                continue;
            }
            t[k] = 0;
            for i in 0..self.d {
                let sub = self.md.mul(c, self.g[i]);
                t[k - self.d + i] = self.md.sub(t[k - self.d + i], sub);
            }
        }
        t.truncate(self.d);
        t
    }

    /// Raises an element to a (possibly huge) power.
    pub fn pow_biguint(&self, a: &[u64], e: &BigUint) -> Vec<u64> {
        let mut acc = self.one();
        let mut base = a.to_vec();
        let bits = e.bits();
        for i in 0..bits {
            if e.bit(i) {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
        }
        acc
    }

    /// Multiplicative inverse of a nonzero element.
    pub fn inv(&self, a: &[u64]) -> Vec<u64> {
        debug_assert!(!self.is_zero(a));
        let order = BigUint::from(self.p()).pow(self.d as u32) - BigUint::from(2u32);
        self.pow_biguint(a, &order)
    }
}

/// The full plaintext slot structure for one `(p, m)` pair.
#[derive(Debug)]
pub struct PlainSpace {
    p_md: Modulus,
    m: u64,
    n: usize,
    d: usize,
    l: usize,
    field: SlotField,
    /// zeta: a primitive m-th root of unity in the slot field.
    zeta: Vec<u64>,
    /// Smallest member of each coset of <p> in (Z/m)^*, ascending.
    coset_reps: Vec<u64>,
    /// Full cosets; entry i lists rep_i * p^e for e = 0..d-1.
    cosets: Vec<Vec<u64>>,
    /// coset_of[x] = slot index of the coset containing x (usize::MAX if
    /// x is not a unit).
    coset_of: Vec<usize>,
    /// frob_of[x] = e such that x = rep * p^e within its coset.
    frob_of: Vec<u32>,
    /// Irreducible factors f_i of Phi_m over F_p, monic, length d + 1.
    factors: Vec<Vec<u64>>,
    /// CRT idempotents e_i modulo Phi_m (degree < n): 1 mod f_i, 0 mod f_j.
    idempotents: Vec<Vec<u64>>,
    /// Per slot, the d x d inverse (row-major) of the matrix whose
    /// columns are the field coordinates of theta_i^k, k = 0..d-1.
    theta_matrix_inv: Vec<Vec<u64>>,
    /// theta_i = zeta^{rep_i} for each slot.
    thetas: Vec<Vec<u64>>,
    /// Phi_m reduced modulo p, monic, length n + 1.
    phi: Vec<u64>,
}

impl PlainSpace {
    /// Builds the slot algebra for plaintext prime `p` and ring index `m`.
    ///
    /// Deterministic: the searches for the field polynomial and the root
    /// of unity are driven by a generator seeded from `(p, m)`.
    pub fn build(p: u64, m: u64) -> Result<Self> {
        if p < 3 || !miller_rabin(p) {
            return Err(Error::UnsupportedP {
                p,
                context: "plaintext modulus must be an odd prime",
            });
        }
        if m < 3 || m % 2 == 0 {
            return Err(Error::InvalidParams(format!(
                "ring index m = {m} must be odd and at least 3"
            )));
        }
        if gcd(p % m, m) != 1 {
            return Err(Error::NotCoprime { p, m });
        }
        let p_md = Modulus::new(p);
        let n = crate::arith::euler_phi(m) as usize;
        let d = crate::arith::mult_order(p, m) as usize;
        let l = n / d;
        debug_assert_eq!(n % d, 0);

        let mut rng = SplitRng::from_seed(p.wrapping_mul(0x9e37_79b9).wrapping_add(m));
        let mut g_rng = rng.split("field-poly");
        let field = SlotField::new(p_md, find_irreducible(&p_md, d, &mut g_rng));

        // zeta: random element raised to (p^d - 1) / m, retried until the
        // order is exactly m.
        let group_order = BigUint::from(p).pow(d as u32) - BigUint::one();
        let cof = &group_order / m;
        let m_prime_divisors: Vec<u64> = factorize(m).into_iter().map(|(q, _)| q).collect();
        let mut z_rng = rng.split("zeta");
        let zeta = loop {
            let mut u = vec![0u64; d];
            for c in u.iter_mut() {
                *c = z_rng.below(p);
            }
            if field.is_zero(&u) {
                continue;
            }
            let cand = field.pow_biguint(&u, &cof);
            if field.is_zero(&cand) || cand == field.one() {
                continue;
            }
            let exact = m_prime_divisors.iter().all(|&r| {
                field.pow_biguint(&cand, &BigUint::from(m / r)) != field.one()
            });
            if exact {
                debug_assert_eq!(field.pow_biguint(&cand, &BigUint::from(m)), field.one());
                break cand;
            }
        };

        // Cosets of <p>, ordered by smallest member.
        let mu = m as usize;
        let mut coset_of = vec![usize::MAX; mu];
        let mut frob_of = vec![0u32; mu];
        let mut coset_reps = Vec::new();
        let mut cosets = Vec::new();
        for x in 1..m {
            if gcd(x, m) != 1 || coset_of[x as usize] != usize::MAX {
                continue;
            }
            let idx = cosets.len();
            let mut orbit = Vec::with_capacity(d);
            let mut y = x;
            let mut e = 0u32;
            loop {
                coset_of[y as usize] = idx;
                frob_of[y as usize] = e;
                orbit.push(y);
                y = (y as u128 * p as u128 % m as u128) as u64;
                e += 1;
                if y == x {
                    break;
                }
            }
            debug_assert_eq!(orbit.len(), d);
            coset_reps.push(x);
            cosets.push(orbit);
        }
        debug_assert_eq!(cosets.len(), l);

        // Powers of zeta, shared by all factor constructions.
        let mut zeta_pow: Vec<Vec<u64>> = Vec::with_capacity(mu);
        let mut acc = field.one();
        for _ in 0..mu {
            zeta_pow.push(acc.clone());
            acc = field.mul(&acc, &zeta);
        }

        // Factors f_i = prod_{j in C_i} (x - zeta^j); the product must
        // collapse to base-field coefficients.
        let mut factors = Vec::with_capacity(l);
        for (i, coset) in cosets.iter().enumerate() {
            // Product polynomial over the extension field.
            let mut poly: Vec<Vec<u64>> = vec![field.one()];
            for &j in coset {
                let root = &zeta_pow[j as usize];
                // Multiply poly by (x - root).
                let mut next: Vec<Vec<u64>> = vec![field.zero(); poly.len() + 1];
                for (k, c) in poly.iter().enumerate() {
                    next[k + 1] = field.add(&next[k + 1], c);
                    let t = field.mul(c, root);
                    next[k] = field.sub(&next[k], &t);
                }
                poly = next;
            }
            let mut flat = Vec::with_capacity(poly.len());
            for (k, c) in poly.iter().enumerate() {
                if c[1..].iter().any(|&x| x != 0) {
                    return Err(Error::FactorizationMismatch {
                        p,
                        m,
                        detail: format!(
                            "coefficient {k} of factor {i} is not in the base field"
                        ),
                    });
                }
                flat.push(c[0]);
            }
            factors.push(flat);
        }

        // The factors must multiply back to Phi_m mod p.
        let phi = cyclotomic_mod_q(m, &p_md);
        let mut prod = vec![1u64];
        for f in &factors {
            prod = poly_mul_fp(&prod, f, &p_md);
        }
        if prod != phi {
            return Err(Error::FactorizationMismatch {
                p,
                m,
                detail: "product of slot factors differs from the cyclotomic polynomial".into(),
            });
        }

        // CRT idempotents: e_i = u_i * (u_i mod f_i)^{-1} mod Phi_m with
        // u_i = Phi_m / f_i.
        let mut idempotents = Vec::with_capacity(l);
        for f in &factors {
            let u = poly_div_exact_fp(&phi, f, &p_md);
            let u_mod = poly_rem_fp(&u, f, &p_md);
            let t = poly_modinv_fp(&u_mod, f, &p_md)?;
            let e = poly_rem_fp(&poly_mul_fp(&u, &t, &p_md), &phi, &p_md);
            let mut e_fixed = e;
            e_fixed.resize(n, 0);
            idempotents.push(e_fixed);
        }

        // theta_i and the inverse coordinate matrices.
        let mut thetas = Vec::with_capacity(l);
        let mut theta_matrix_inv = Vec::with_capacity(l);
        for &rep in &coset_reps {
            let theta = zeta_pow[rep as usize].clone();
            // Columns: coordinates of theta^k.
            let mut mat = vec![0u64; d * d];
            let mut pw = field.one();
            for k in 0..d {
                for r in 0..d {
                    mat[r * d + k] = pw[r];
                }
                pw = field.mul(&pw, &theta);
            }
            let inv = invert_matrix_fp(&mat, d, &p_md).ok_or_else(|| {
                Error::FactorizationMismatch {
                    p,
                    m,
                    detail: "slot coordinate matrix is singular".into(),
                }
            })?;
            thetas.push(theta);
            theta_matrix_inv.push(inv);
        }

        Ok(Self {
            p_md,
            m,
            n,
            d,
            l,
            field,
            zeta,
            coset_reps,
            cosets,
            coset_of,
            frob_of,
            factors,
            idempotents,
            theta_matrix_inv,
            thetas,
            phi,
        })
    }

    /// Plaintext prime p.
    pub fn p(&self) -> u64 {
        self.p_md.q()
    }

    /// Ring index m.
    pub fn m(&self) -> u64 {
        self.m
    }

    /// Ring degree n = phi(m).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Slot field extension degree d = ord_m(p).
    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of slots l = n / d.
    pub fn slots(&self) -> usize {
        self.l
    }

    /// The slot field.
    pub fn field(&self) -> &SlotField {
        &self.field
    }

    /// The primitive m-th root of unity in the slot field that anchors
    /// the factorization; slot i evaluates polynomials at
    /// `zeta^{coset_reps[i]}`.
    pub fn zeta(&self) -> &[u64] {
        &self.zeta
    }

    /// Coset representatives, ascending; slot i evaluates at
    /// `zeta^{coset_reps[i]}`.
    pub fn coset_reps(&self) -> &[u64] {
        &self.coset_reps
    }

    /// The full coset for slot i.
    pub fn coset(&self, i: usize) -> &[u64] {
        &self.cosets[i]
    }

    /// Irreducible factor f_i of Phi_m, monic, length d + 1.
    pub fn factor(&self, i: usize) -> &[u64] {
        &self.factors[i]
    }

    /// Phi_m modulo p, monic, length n + 1.
    pub fn phi(&self) -> &[u64] {
        &self.phi
    }

    /// Encodes one field element per slot into polynomial coefficients
    /// (length n, reduced modulo p).
    pub fn encode(&self, slots: &[Vec<u64>]) -> Result<Vec<u64>> {
        if slots.len() != self.l {
            return Err(Error::WrongSlotCount {
                expected: self.l,
                got: slots.len(),
            });
        }
        let mut out = vec![0u64; self.n];
        for (i, v) in slots.iter().enumerate() {
            if v.len() != self.d {
                return Err(Error::BadLength {
                    expected: self.d,
                    got: v.len(),
                    context: "slot field element",
                });
            }
            // r = A_i^{-1} v: the degree-< d polynomial with r(theta_i) = v.
            let inv = &self.theta_matrix_inv[i];
            let mut r = vec![0u64; self.d];
            for (row, rr) in r.iter_mut().enumerate() {
                let mut acc = 0u64;
                for (col, &vc) in v.iter().enumerate() {
                    acc = self.p_md.add(acc, self.p_md.mul(inv[row * self.d + col], vc));
                }
                *rr = acc;
            }
            // out += r * e_i (mod Phi_m); deg(r * e_i) < d + n, folded by
            // repeated shifts of the idempotent.
            let e_i = &self.idempotents[i];
            let mut shifted: Vec<u64> = e_i.clone();
            for (k, &rk) in r.iter().enumerate() {
                if rk != 0 {
                    for (o, &s) in out.iter_mut().zip(shifted.iter()) {
                        *o = self.p_md.add(*o, self.p_md.mul(rk, s));
                    }
                }
                if k + 1 < self.d {
                    shifted = self.shift_mod_phi(&shifted);
                }
            }
        }
        Ok(out)
    }

    /// Multiplies a degree-< n polynomial by x modulo Phi_m.
    fn shift_mod_phi(&self, poly: &[u64]) -> Vec<u64> {
        let n = self.n;
        let mut out = vec![0u64; n];
        let top = poly[n - 1];
        out[1..n].copy_from_slice(&poly[..n - 1]);
        if top != 0 {
            for i in 0..n {
                let s = self.p_md.mul(top, self.phi[i]);
                out[i] = self.p_md.sub(out[i], s);
            }
        }
        out
    }

    /// Decodes polynomial coefficients into one field element per slot.
    pub fn decode(&self, poly: &[u64]) -> Result<Vec<Vec<u64>>> {
        if poly.len() != self.n {
            return Err(Error::BadLength {
                expected: self.n,
                got: poly.len(),
                context: "plaintext polynomial",
            });
        }
        let mut out = Vec::with_capacity(self.l);
        for i in 0..self.l {
            // Reduce modulo f_i first, then evaluate at theta_i.
            let r = poly_rem_fp(poly, &self.factors[i], &self.p_md);
            let mut acc = self.field.zero();
            for &c in r.iter().rev() {
                acc = self.field.mul(&acc, &self.thetas[i]);
                let mut c_el = self.field.zero();
                c_el[0] = c;
                acc = self.field.add(&acc, &c_el);
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// Encodes base-field scalars (one per slot).
    pub fn encode_scalars(&self, vals: &[u64]) -> Result<Vec<u64>> {
        if vals.len() != self.l {
            return Err(Error::WrongSlotCount {
                expected: self.l,
                got: vals.len(),
            });
        }
        let slots: Vec<Vec<u64>> = vals.iter().map(|&v| self.field.from_scalar(v)).collect();
        self.encode(&slots)
    }

    /// Decodes to base-field scalars; fails if any slot carries a proper
    /// extension-field element.
    pub fn decode_scalars(&self, poly: &[u64]) -> Result<Vec<u64>> {
        let slots = self.decode(poly)?;
        let mut out = Vec::with_capacity(self.l);
        for (i, s) in slots.iter().enumerate() {
            if s[1..].iter().any(|&c| c != 0) {
                return Err(Error::InvalidParams(format!(
                    "slot {i} holds a non-scalar field element"
                )));
            }
            out.push(s[0]);
        }
        Ok(out)
    }

    /// Product of two plaintext polynomials modulo Phi_m and p.
    pub fn mul_mod_phi(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let prod = poly_mul_fp(a, b, &self.p_md);
        let mut r = poly_rem_fp(&prod, &self.phi, &self.p_md);
        r.resize(self.n, 0);
        r
    }

    /// Slot-level effect of the Galois map `f(x) -> f(x^t)`: for each
    /// destination slot `i`, returns the source slot and the Frobenius
    /// power applied to it. For base-field scalar data, the Frobenius is
    /// the identity and the map is a pure slot permutation.
    pub fn galois_slot_map(&self, t: u64) -> Result<Vec<(usize, u32)>> {
        if gcd(t % self.m, self.m) != 1 {
            return Err(Error::InvalidParams(format!(
                "Galois exponent {t} not coprime to m = {}",
                self.m
            )));
        }
        let mut map = Vec::with_capacity(self.l);
        for &rep in &self.coset_reps {
            let x = (rep as u128 * t as u128 % self.m as u128) as u64;
            map.push((self.coset_of[x as usize], self.frob_of[x as usize]));
        }
        Ok(map)
    }

    /// Smallest unit `t` whose powers reach every coset: a generator of
    /// the quotient of the unit group by `<p>`. `None` when the quotient
    /// is not cyclic.
    pub fn quotient_generator(&self) -> Option<u64> {
        if self.l == 1 {
            return Some(1);
        }
        for t in 2..self.m {
            if gcd(t, self.m) != 1 {
                continue;
            }
            let mut seen = vec![false; self.l];
            let mut count = 0usize;
            let mut x = 1u64;
            for _ in 0..self.l {
                x = (x as u128 * t as u128 % self.m as u128) as u64;
                let c = self.coset_of[x as usize];
                if !seen[c] {
                    seen[c] = true;
                    count += 1;
                }
            }
            // t generates the quotient iff its first l powers cover all
            // l cosets.
            if count == self.l {
                return Some(t);
            }
        }
        None
    }
}

/// Searches for a monic irreducible polynomial of degree `d` over F_p.
fn find_irreducible(md: &Modulus, d: usize, rng: &mut SplitRng) -> Vec<u64> {
    let p = md.q();
    loop {
        let mut g = vec![0u64; d + 1];
        for c in g.iter_mut().take(d) {
            *c = rng.below(p);
        }
        g[d] = 1;
        // Degree-d polynomials with zero constant term are divisible by y.
        if g[0] == 0 {
            continue;
        }
        if is_irreducible(&g, md) {
            return g;
        }
    }
}

/// Rabin irreducibility test: g (monic, degree d) is irreducible over F_p
/// iff y^(p^d) = y mod g and gcd(y^(p^(d/r)) - y, g) = 1 for every prime
/// r dividing d.
fn is_irreducible(g: &[u64], md: &Modulus) -> bool {
    let d = g.len() - 1;
    if d == 0 {
        return false;
    }
    if d == 1 {
        return true;
    }
    let p = md.q();
    let y = vec![0u64, 1];
    let frob = |k: u32| -> Vec<u64> {
        // y^(p^k) mod g via big-exponent powering.
        let e = BigUint::from(p).pow(k);
        poly_powmod_fp(&y, &e, g, md)
    };
    let full = frob(d as u32);
    let mut y_mod = poly_rem_fp(&y, g, md);
    normalize(&mut y_mod);
    let mut full_n = full;
    normalize(&mut full_n);
    if full_n != y_mod {
        return false;
    }
    for (r, _) in factorize(d as u64) {
        let part = frob((d as u64 / r) as u32);
        let mut diff = poly_sub_fp(&part, &y_mod, md);
        normalize(&mut diff);
        let g_common = poly_gcd_fp(&diff, g, md);
        if g_common.len() != 1 {
            return false;
        }
    }
    true
}

fn normalize(p: &mut Vec<u64>) {
    while p.len() > 1 && *p.last().unwrap() == 0 {
        p.pop();
    }
}

fn poly_mul_fp(a: &[u64], b: &[u64], md: &Modulus) -> Vec<u64> {
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = md.add(out[i + j], md.mul(x, y));
        }
    }
    out
}

fn poly_sub_fp(a: &[u64], b: &[u64], md: &Modulus) -> Vec<u64> {
    let len = a.len().max(b.len());
    let mut out = vec![0u64; len];
    for i in 0..len {
        let x = a.get(i).copied().unwrap_or(0);
        let y = b.get(i).copied().unwrap_or(0);
        out[i] = md.sub(x, y);
    }
    out
}

/// Remainder of `a` divided by `b` (b need not be monic).
fn poly_rem_fp(a: &[u64], b: &[u64], md: &Modulus) -> Vec<u64> {
    let mut rem = a.to_vec();
    normalize(&mut rem);
    let mut bb = b.to_vec();
    normalize(&mut bb);
    let db = bb.len() - 1;
    if db == 0 {
        return vec![0];
    }
    let lead_inv = md.inv(bb[db]);
    while rem.len() > db {
        let k = rem.len() - 1;
        let c = md.mul(rem[k], lead_inv);
        if c != 0 {
            for (j, &bj) in bb.iter().enumerate() {
                let idx = k - db + j;
                let s = md.mul(c, bj);
                rem[idx] = md.sub(rem[idx], s);
            }
        }
        rem.pop();
        normalize(&mut rem);
        if rem.iter().all(|&x| x == 0) {
            return vec![0];
        }
    }
    rem
}

/// Exact quotient `a / b` for monic `b`; panics on a nonzero remainder.
fn poly_div_exact_fp(a: &[u64], b: &[u64], md: &Modulus) -> Vec<u64> {
    let db = b.len() - 1;
    assert_eq!(b[db], 1, "divisor must be monic");
    let mut rem = a.to_vec();
    let dq = rem.len() - 1 - db;
    let mut q = vec![0u64; dq + 1];
    for k in (0..=dq).rev() {
        let c = rem[k + db];
        q[k] = c;
        if c != 0 {
            for (j, &bj) in b.iter().enumerate() {
                let s = md.mul(c, bj);
                rem[k + j] = md.sub(rem[k + j], s);
            }
        }
    }
    assert!(rem.iter().all(|&c| c == 0), "division left a remainder");
    q
}

fn poly_gcd_fp(a: &[u64], b: &[u64], md: &Modulus) -> Vec<u64> {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    normalize(&mut x);
    normalize(&mut y);
    while !(y.len() == 1 && y[0] == 0) {
        let r = poly_rem_fp(&x, &y, md);
        x = y;
        y = r;
        normalize(&mut y);
    }
    // Normalize to monic.
    let lead = *x.last().unwrap();
    if lead != 0 && lead != 1 {
        let inv = md.inv(lead);
        for c in x.iter_mut() {
            *c = md.mul(*c, inv);
        }
    }
    x
}

/// Inverse of `a` modulo `f` via the extended Euclidean algorithm.
fn poly_modinv_fp(a: &[u64], f: &[u64], md: &Modulus) -> Result<Vec<u64>> {
    // Maintain r0 = s0 * a (mod f), r1 = s1 * a (mod f).
    let mut r0 = f.to_vec();
    let mut r1 = poly_rem_fp(a, f, md);
    let mut s0 = vec![0u64];
    let mut s1 = vec![1u64];
    normalize(&mut r0);
    normalize(&mut r1);
    while !(r1.len() == 1 && r1[0] == 0) {
        // Quotient of r0 by r1.
        let (q, r) = poly_divrem_fp(&r0, &r1, md);
        let qs1 = poly_mul_fp(&q, &s1, md);
        let mut s_new = poly_sub_fp(&s0, &qs1, md);
        normalize(&mut s_new);
        r0 = r1;
        r1 = r;
        s0 = s1;
        s1 = s_new;
        normalize(&mut r1);
    }
    if r0.len() != 1 || r0[0] == 0 {
        return Err(Error::InvalidParams(
            "element not invertible in the quotient ring".into(),
        ));
    }
    // gcd = r0 = s0 * a (mod f); scale so the gcd is 1.
    let inv = md.inv(r0[0]);
    let mut out = poly_rem_fp(&s0, f, md);
    for c in out.iter_mut() {
        *c = md.mul(*c, inv);
    }
    normalize(&mut out);
    Ok(out)
}

fn poly_divrem_fp(a: &[u64], b: &[u64], md: &Modulus) -> (Vec<u64>, Vec<u64>) {
    let mut rem = a.to_vec();
    normalize(&mut rem);
    let mut bb = b.to_vec();
    normalize(&mut bb);
    let db = bb.len() - 1;
    let lead_inv = md.inv(bb[db]);
    if rem.len() <= db {
        return (vec![0], rem);
    }
    let dq = rem.len() - 1 - db;
    let mut q = vec![0u64; dq + 1];
    for k in (0..=dq).rev() {
        let c = md.mul(rem[k + db], lead_inv);
        q[k] = c;
        if c != 0 {
            for (j, &bj) in bb.iter().enumerate() {
                let s = md.mul(c, bj);
                rem[k + j] = md.sub(rem[k + j], s);
            }
        }
    }
    normalize(&mut rem);
    (q, rem)
}

/// `base^e mod f` over F_p[y].
fn poly_powmod_fp(base: &[u64], e: &BigUint, f: &[u64], md: &Modulus) -> Vec<u64> {
    let mut acc = vec![1u64];
    let mut b = poly_rem_fp(base, f, md);
    for i in 0..e.bits() {
        if e.bit(i) {
            acc = poly_rem_fp(&poly_mul_fp(&acc, &b, md), f, md);
        }
        b = poly_rem_fp(&poly_mul_fp(&b, &b, md), f, md);
    }
    acc
}

/// Inverts a d x d row-major matrix over F_p; `None` if singular.
fn invert_matrix_fp(mat: &[u64], d: usize, md: &Modulus) -> Option<Vec<u64>> {
    // Augmented Gauss-Jordan.
    let mut a = mat.to_vec();
    let mut inv = vec![0u64; d * d];
    for i in 0..d {
        inv[i * d + i] = 1;
    }
    for col in 0..d {
        // Find pivot.
        let pivot = (col..d).find(|&r| a[r * d + col] != 0)?;
        if pivot != col {
            for k in 0..d {
                a.swap(col * d + k, pivot * d + k);
                inv.swap(col * d + k, pivot * d + k);
            }
        }
        let pinv = md.inv(a[col * d + col]);
        for k in 0..d {
            a[col * d + k] = md.mul(a[col * d + k], pinv);
            inv[col * d + k] = md.mul(inv[col * d + k], pinv);
        }
        for r in 0..d {
            if r == col {
                continue;
            }
            let factor = a[r * d + col];
            if factor == 0 {
                continue;
            }
            for k in 0..d {
                let s = md.mul(factor, a[col * d + k]);
                a[r * d + k] = md.sub(a[r * d + k], s);
                let s = md.mul(factor, inv[col * d + k]);
                inv[r * d + k] = md.sub(inv[r * d + k], s);
            }
        }
    }
    Some(inv)
}
