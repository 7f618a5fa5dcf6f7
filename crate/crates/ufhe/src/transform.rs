//! Evaluation-domain transforms for non-power-of-two cyclotomic rings.
//!
//! A ring element lives in `Z_q[x] / Phi_m(x)` with `m` odd and not a
//! power of two, so the usual radix-2 negacyclic NTT does not apply.
//! Instead, the chirp-transform (Bluestein) trick turns the length-`m`
//! DFT into one cyclic convolution of power-of-two length `M >= 2m - 1`,
//! which runs on a standard radix-2 NTT. Only the `n = phi(m)` primitive
//! root positions carry information; a branch-free filter compacts them
//! out of the full spectrum, and the inverse path scatters them back,
//! runs the inverse DFT, and reduces the result modulo `Phi_m`.
//!
//! Plans precompute every table needed for one `(m, q)` pair: chirp
//! weights, the convolution kernel in NTT domain, twiddle powers, the
//! coprime-position mask with its prefix sums, and the reduction rows for
//! `x^{n+t} mod Phi_m`. A process-wide [`PlanCache`] guarantees each pair
//! is built exactly once.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::arith::{factorize, gcd, Modulus};
use crate::error::{Error, Result};
use crate::metrics::{Category, ScopedTimer};

/// Smallest power of two greater than or equal to `x`.
pub fn next_pow2_at_least(x: u64) -> u64 {
    x.next_power_of_two()
}

/// Coefficients of the cyclotomic polynomial `Phi_m` reduced modulo `q`,
/// lowest degree first, length `phi(m) + 1`, monic.
///
/// Computed as the exact quotient of the products of `x^d - 1` over
/// divisors `d` of `m` with Moebius weight +1 and -1 respectively.
pub fn cyclotomic_mod_q(m: u64, md: &Modulus) -> Vec<u64> {
    let factors = factorize(m);
    let primes: Vec<u64> = factors.iter().map(|&(p, _)| p).collect();
    let radical: u64 = primes.iter().product();
    // Phi_m(x) = Phi_radical(x^(m / radical)); build the squarefree case
    // by inclusion-exclusion over subsets of the prime set.
    let t = primes.len();
    let mut num = vec![poly_x_pow_minus_1(radical, md)]; // mu = +1 terms
    let mut den = Vec::new(); // mu = -1 terms
    for subset in 1u64..(1 << t) {
        let mut d = radical;
        for (i, &p) in primes.iter().enumerate() {
            if subset >> i & 1 == 1 {
                d /= p;
            }
        }
        let poly = poly_x_pow_minus_1(d, md);
        if subset.count_ones() % 2 == 0 {
            num.push(poly);
        } else {
            den.push(poly);
        }
    }
    let mut acc = vec![1u64];
    for p in num {
        acc = poly_mul(&acc, &p, md);
    }
    for p in den {
        acc = poly_div_exact(&acc, &p, md);
    }
    // Substitute x -> x^(m / radical).
    let stretch = (m / radical) as usize;
    if stretch > 1 {
        let mut out = vec![0u64; (acc.len() - 1) * stretch + 1];
        for (i, &c) in acc.iter().enumerate() {
            out[i * stretch] = c;
        }
        acc = out;
    }
    acc
}

fn poly_x_pow_minus_1(d: u64, md: &Modulus) -> Vec<u64> {
    let mut p = vec![0u64; d as usize + 1];
    p[0] = md.neg(1);
    p[d as usize] = 1;
    p
}

fn poly_mul(a: &[u64], b: &[u64], md: &Modulus) -> Vec<u64> {
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

/// Exact division of polynomials over `Z_q`; panics if a remainder is
/// left (never happens for cyclotomic factors).
fn poly_div_exact(a: &[u64], b: &[u64], md: &Modulus) -> Vec<u64> {
    let mut rem = a.to_vec();
    let db = b.len() - 1;
    assert!(b[db] == 1, "divisor must be monic");
    let dq = rem.len() - 1 - db;
    let mut q = vec![0u64; dq + 1];
    for k in (0..=dq).rev() {
        let c = rem[k + db];
        q[k] = c;
        if c != 0 {
            for (j, &bj) in b.iter().enumerate() {
                rem[k + j] = md.sub(rem[k + j], md.mul(c, bj));
            }
        }
    }
    assert!(rem.iter().all(|&c| c == 0), "division left a remainder");
    q
}

/// Reusable buffers for transform calls; grows on demand and is safe to
/// share across plans with different sizes.
#[derive(Debug, Default)]
pub struct TransformScratch {
    pad: Vec<u64>,
    full: Vec<u64>,
}

impl TransformScratch {
    /// Fresh empty scratch.
    pub fn new() -> Self {
        Self::default()
    }

    fn ensure(&mut self, m: usize, big_m: usize) {
        if self.pad.len() < big_m {
            self.pad.resize(big_m, 0);
        }
        if self.full.len() < m {
            self.full.resize(m, 0);
        }
    }
}

/// Precomputed tables for the length-`m` evaluation transform modulo one
/// prime `q`.
#[derive(Debug, Clone)]
pub struct BluesteinPlan {
    m: usize,
    n: usize,
    big_m: usize,
    md: Modulus,
    /// chirp_pos[k] = w^(k^2 mod 2m) with w a primitive 2m-th root.
    chirp_pos: Vec<u64>,
    /// chirp_neg[k] = w^(-k^2 mod 2m).
    chirp_neg: Vec<u64>,
    /// NTT-domain kernel for the forward direction (padded w^(-k^2) with
    /// wrap-around placement of the negative indices).
    ker_fwd_hat: Vec<u64>,
    /// NTT-domain kernel for the inverse direction (padded w^(+k^2)).
    ker_inv_hat: Vec<u64>,
    /// Twiddle powers psi^i for i < M/2, psi a primitive M-th root.
    pow_w: Vec<u64>,
    /// Inverse twiddle powers psi^(-i).
    pow_wi: Vec<u64>,
    /// M^{-1} mod q, applied by the inverse convolution NTT.
    big_m_inv: u64,
    /// m^{-1} mod q, applied by the inverse DFT.
    m_inv: u64,
    /// 1 for positions coprime to m, else 0.
    mask: Vec<u64>,
    /// Exclusive prefix sums of `mask`, clamped to n - 1.
    prefix: Vec<usize>,
    /// Positions coprime to m, ascending (the compact order).
    coprime_positions: Vec<usize>,
    /// Phi_m mod q, lowest degree first, monic, length n + 1.
    phi: Vec<u64>,
    /// red_rows[t] = coefficients of x^(n+t) mod Phi_m, length n.
    red_rows: Vec<Vec<u64>>,
}

impl BluesteinPlan {
    /// Builds all tables for ring index `m` and prime modulus `q`.
    ///
    /// Requires `m` odd and at least 3, and `q ≡ 1 (mod lcm(2m, M))`
    /// where `M` is the padded power-of-two length, so that the needed
    /// roots of unity exist.
    pub fn build(m: u64, q: u64) -> Result<Self> {
        let _t = ScopedTimer::new(Category::Other);
        if m < 3 || m % 2 == 0 {
            return Err(Error::InvalidParams(format!(
                "ring index m = {m} must be odd and at least 3"
            )));
        }
        let md = Modulus::new(q);
        let big_m = next_pow2_at_least(2 * m - 1) as usize;
        let mu = m as usize;
        let n = crate::arith::euler_phi(m) as usize;

        let w2m = crate::arith::find_root(2 * m, &md)?;
        let psi = crate::arith::find_root(big_m as u64, &md)?;
        let w2m_inv = md.inv(w2m);
        let psi_inv = md.inv(psi);

        let two_m = 2 * m;
        let mut chirp_pos = Vec::with_capacity(mu);
        let mut chirp_neg = Vec::with_capacity(mu);
        for k in 0..m {
            let e = ((k as u128 * k as u128) % two_m as u128) as u64;
            chirp_pos.push(md.pow(w2m, e));
            chirp_neg.push(md.pow(w2m_inv, e));
        }

        let mut pow_w = Vec::with_capacity(big_m / 2);
        let mut pow_wi = Vec::with_capacity(big_m / 2);
        let mut acc_f = 1u64;
        let mut acc_i = 1u64;
        for _ in 0..big_m / 2 {
            pow_w.push(acc_f);
            pow_wi.push(acc_i);
            acc_f = md.mul(acc_f, psi);
            acc_i = md.mul(acc_i, psi_inv);
        }

        let big_m_inv = md.inv(md.reduce(big_m as u64));
        let m_inv = md.inv(md.reduce(m));

        // Padded kernels: index k in [0, m) holds b[k] and index M - k
        // (k in [1, m)) holds b[-k] = b[k], the wrap-around placement of
        // the negative half of the linear-convolution kernel.
        let mut ker_fwd = vec![0u64; big_m];
        let mut ker_inv = vec![0u64; big_m];
        for k in 0..mu {
            ker_fwd[k] = chirp_neg[k];
            ker_inv[k] = chirp_pos[k];
            if k > 0 {
                ker_fwd[big_m - k] = chirp_neg[k];
                ker_inv[big_m - k] = chirp_pos[k];
            }
        }
        ntt_dif(&mut ker_fwd, &md, &pow_w);
        ntt_dif(&mut ker_inv, &md, &pow_w);

        let mut mask = Vec::with_capacity(mu);
        let mut prefix = Vec::with_capacity(mu);
        let mut coprime_positions = Vec::with_capacity(n);
        let mut running = 0usize;
        for j in 0..m {
            let keep = gcd(j, m) == 1;
            prefix.push(running.min(n - 1));
            if keep {
                coprime_positions.push(j as usize);
                running += 1;
            }
            mask.push(keep as u64);
        }
        debug_assert_eq!(running, n);

        let phi = cyclotomic_mod_q(m, &md);
        debug_assert_eq!(phi.len(), n + 1);
        debug_assert_eq!(phi[n], 1);

        // Reduction rows: x^n ≡ -(phi_0 + phi_1 x + ...), then repeatedly
        // multiply by x and fold the overflow term back in.
        let rows = mu - n;
        let mut red_rows = Vec::with_capacity(rows);
        let mut row: Vec<u64> = (0..n).map(|i| md.neg(phi[i])).collect();
        for _ in 0..rows {
            red_rows.push(row.clone());
            let top = row[n - 1];
            for i in (1..n).rev() {
                row[i] = row[i - 1];
            }
            row[0] = 0;
            if top != 0 {
                for i in 0..n {
                    row[i] = md.add(row[i], md.mul(top, md.neg(phi[i])));
                }
            }
        }

        Ok(Self {
            m: mu,
            n,
            big_m,
            md,
            chirp_pos,
            chirp_neg,
            ker_fwd_hat: ker_fwd,
            ker_inv_hat: ker_inv,
            pow_w,
            pow_wi,
            big_m_inv,
            m_inv,
            mask,
            prefix,
            coprime_positions,
            phi,
            red_rows,
        })
    }

    /// Ring index m.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Degree `n = phi(m)` of the ring.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Padded convolution length (a power of two).
    pub fn padded_len(&self) -> usize {
        self.big_m
    }

    /// The prime modulus.
    pub fn modulus(&self) -> &Modulus {
        &self.md
    }

    /// Positions in `[0, m)` coprime to `m`, ascending; the `i`-th entry
    /// is the exponent evaluated into compact slot `i`.
    pub fn coprime_positions(&self) -> &[usize] {
        &self.coprime_positions
    }

    /// `Phi_m` modulo `q`, monic, lowest degree first.
    pub fn phi(&self) -> &[u64] {
        &self.phi
    }

    /// Full cyclic DFT of length `m`: evaluates the polynomial with the
    /// given coefficients (degree < m) at `omega^j` for every `j` in
    /// `[0, m)`, `omega` a fixed primitive m-th root.
    pub fn dft_full(&self, coeffs: &[u64], out: &mut [u64], scratch: &mut TransformScratch) {
        let _t = ScopedTimer::new(Category::Transform);
        assert!(coeffs.len() <= self.m && out.len() == self.m);
        scratch.ensure(self.m, self.big_m);
        let buf = &mut scratch.pad[..self.big_m];
        buf.fill(0);
        for (k, &c) in coeffs.iter().enumerate() {
            buf[k] = self.md.mul(c, self.chirp_pos[k]);
        }
        ntt_dif(buf, &self.md, &self.pow_w);
        for (b, &k) in buf.iter_mut().zip(self.ker_fwd_hat.iter()) {
            *b = self.md.mul(*b, k);
        }
        ntt_dit(buf, &self.md, &self.pow_wi);
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.md.mul(self.md.mul(buf[j], self.big_m_inv), self.chirp_pos[j]);
        }
    }

    /// Full inverse DFT of length `m`: recovers the unique polynomial of
    /// degree < m with the given values at all m-th roots.
    pub fn idft_full(&self, values: &[u64], out: &mut [u64], scratch: &mut TransformScratch) {
        let _t = ScopedTimer::new(Category::Transform);
        assert!(values.len() == self.m && out.len() == self.m);
        scratch.ensure(self.m, self.big_m);
        let buf = &mut scratch.pad[..self.big_m];
        buf.fill(0);
        for (k, &v) in values.iter().enumerate() {
            buf[k] = self.md.mul(v, self.chirp_neg[k]);
        }
        ntt_dif(buf, &self.md, &self.pow_w);
        for (b, &k) in buf.iter_mut().zip(self.ker_inv_hat.iter()) {
            *b = self.md.mul(*b, k);
        }
        ntt_dit(buf, &self.md, &self.pow_wi);
        for (j, o) in out.iter_mut().enumerate() {
            let v = self.md.mul(self.md.mul(buf[j], self.big_m_inv), self.chirp_neg[j]);
            *o = self.md.mul(v, self.m_inv);
        }
    }

    /// Branch-free compaction of a full spectrum (length m) down to the
    /// `n` primitive-root positions in ascending-exponent order.
    ///
    /// Every iteration performs the same reads and writes regardless of
    /// whether the position is kept: dropped positions rewrite the
    /// current value of the pending output slot, kept positions replace
    /// it and advance.
    pub fn filter_compact(&self, full: &[u64], out: &mut [u64]) {
        assert!(full.len() == self.m && out.len() == self.n);
        for j in 0..self.m {
            let idx = self.prefix[j];
            let keep = self.mask[j];
            let cur = out[idx];
            out[idx] = keep * full[j] + (1 - keep) * cur;
        }
    }

    /// Straightforward reference for [`Self::filter_compact`], with a
    /// branch per position.
    pub fn filter_compact_reference(&self, full: &[u64], out: &mut [u64]) {
        assert!(full.len() == self.m && out.len() == self.n);
        let mut w = 0usize;
        for j in 0..self.m {
            if self.mask[j] == 1 {
                out[w] = full[j];
                w += 1;
            }
        }
        debug_assert_eq!(w, self.n);
    }

    /// Scatters a compact evaluation vector back to full length, placing
    /// zeros at non-primitive positions.
    pub fn scatter(&self, compact: &[u64], full: &mut [u64]) {
        assert!(compact.len() == self.n && full.len() == self.m);
        for j in 0..self.m {
            let keep = self.mask[j];
            full[j] = keep * compact[self.prefix[j]];
        }
    }

    /// Reduces a polynomial of degree < m to degree < n modulo `Phi_m`,
    /// writing the `n` coefficients to `out`.
    pub fn reduce_mod_phi(&self, poly: &[u64], out: &mut [u64]) {
        assert!(poly.len() <= self.m && out.len() == self.n);
        let n = self.n;
        for (o, &c) in out.iter_mut().zip(poly.iter()) {
            *o = c;
        }
        if poly.len() <= n {
            for o in out.iter_mut().skip(poly.len()) {
                *o = 0;
            }
            return;
        }
        for (t, row) in self.red_rows.iter().enumerate() {
            let c = match poly.get(n + t) {
                Some(&c) if c != 0 => c,
                _ => continue,
            };
            for i in 0..n {
                out[i] = self.md.add(out[i], self.md.mul(c, row[i]));
            }
        }
    }

    /// Coefficients (length n) to compact evaluations (length n).
    pub fn to_eval_into(
        &self,
        coeffs: &[u64],
        out: &mut [u64],
        scratch: &mut TransformScratch,
    ) -> Result<()> {
        if coeffs.len() != self.n || out.len() != self.n {
            return Err(Error::BadLength {
                expected: self.n,
                got: if coeffs.len() != self.n {
                    coeffs.len()
                } else {
                    out.len()
                },
                context: "to_eval",
            });
        }
        scratch.ensure(self.m, self.big_m);
        let mut full = std::mem::take(&mut scratch.full);
        self.dft_full(coeffs, &mut full[..self.m], scratch);
        self.filter_compact(&full[..self.m], out);
        scratch.full = full;
        Ok(())
    }

    /// Compact evaluations (length n) back to coefficients (length n).
    pub fn from_eval_into(
        &self,
        evals: &[u64],
        out: &mut [u64],
        scratch: &mut TransformScratch,
    ) -> Result<()> {
        if evals.len() != self.n || out.len() != self.n {
            return Err(Error::BadLength {
                expected: self.n,
                got: if evals.len() != self.n {
                    evals.len()
                } else {
                    out.len()
                },
                context: "from_eval",
            });
        }
        scratch.ensure(self.m, self.big_m);
        let mut full = std::mem::take(&mut scratch.full);
        self.scatter(evals, &mut full[..self.m]);
        let mut poly = vec![0u64; self.m];
        self.idft_full(&full[..self.m], &mut poly, scratch);
        scratch.full = full;
        self.reduce_mod_phi(&poly, out);
        Ok(())
    }

    /// Convenience wrapper allocating its own scratch.
    pub fn to_eval(&self, coeffs: &[u64]) -> Result<Vec<u64>> {
        let mut scratch = TransformScratch::new();
        let mut out = vec![0u64; self.n];
        self.to_eval_into(coeffs, &mut out, &mut scratch)?;
        Ok(out)
    }

    /// Convenience wrapper allocating its own scratch.
    pub fn from_eval(&self, evals: &[u64]) -> Result<Vec<u64>> {
        let mut scratch = TransformScratch::new();
        let mut out = vec![0u64; self.n];
        self.from_eval_into(evals, &mut out, &mut scratch)?;
        Ok(out)
    }

    /// Naive O(n * m) evaluation at every primitive root, for testing.
    pub fn to_eval_naive(&self, coeffs: &[u64]) -> Vec<u64> {
        let md = &self.md;
        // Same primitive root the fast path uses: omega = w2m^2, which is
        // chirp_pos[1]^2 only when m is odd... recompute from the chirp:
        // chirp_pos[1] = w2m, so omega = w2m^2.
        let w2m = self.chirp_pos[1];
        let omega = md.mul(w2m, w2m);
        self.coprime_positions
            .iter()
            .map(|&j| {
                let root = md.pow(omega, j as u64);
                // Horner from the top coefficient.
                coeffs
                    .iter()
                    .rev()
                    .fold(0u64, |acc, &c| md.add(md.mul(acc, root), c))
            })
            .collect()
    }
}

/// In-place radix-2 NTT, Gentleman-Sande decimation-in-frequency:
/// natural-order input, bit-reversed output. `pow_w[i]` must hold the
/// i-th power of a primitive root of order `a.len()`.
pub fn ntt_dif(a: &mut [u64], md: &Modulus, pow_w: &[u64]) {
    let n = a.len();
    debug_assert!(n.is_power_of_two() && pow_w.len() >= n / 2);
    let mut len = n;
    let mut step = 1usize;
    while len >= 2 {
        let half = len / 2;
        let mut start = 0;
        while start < n {
            for i in 0..half {
                let w = pow_w[i * step];
                let u = a[start + i];
                let v = a[start + i + half];
                a[start + i] = md.add(u, v);
                a[start + i + half] = md.mul(md.sub(u, v), w);
            }
            start += len;
        }
        len = half;
        step *= 2;
    }
}

/// In-place radix-2 NTT, Cooley-Tukey decimation-in-time: bit-reversed
/// input, natural-order output. With `pow_wi` the inverse-root powers,
/// this inverts [`ntt_dif`] up to a factor of `a.len()`.
pub fn ntt_dit(a: &mut [u64], md: &Modulus, pow_wi: &[u64]) {
    let n = a.len();
    debug_assert!(n.is_power_of_two() && pow_wi.len() >= n / 2);
    let mut len = 2usize;
    let mut step = n / 2;
    while len <= n {
        let half = len / 2;
        let mut start = 0;
        while start < n {
            for i in 0..half {
                let w = pow_wi[i * step];
                let u = a[start + i];
                let v = md.mul(a[start + i + half], w);
                a[start + i] = md.add(u, v);
                a[start + i + half] = md.sub(u, v);
            }
            start += len;
        }
        len *= 2;
        step /= 2;
    }
}

/// Converts several residue rows coefficient-to-evaluation one row at a
/// time, each with its own scratch: the reference pipeline.
pub fn to_eval_rows_reference(
    plans: &[Arc<BluesteinPlan>],
    rows: &[Vec<u64>],
) -> Result<Vec<Vec<u64>>> {
    check_rows(plans, rows)?;
    let mut out = Vec::with_capacity(rows.len());
    for (plan, row) in plans.iter().zip(rows.iter()) {
        out.push(plan.to_eval(row)?);
    }
    Ok(out)
}

/// Converts several residue rows evaluation-to-coefficient one row at a
/// time: the reference pipeline.
pub fn from_eval_rows_reference(
    plans: &[Arc<BluesteinPlan>],
    rows: &[Vec<u64>],
) -> Result<Vec<Vec<u64>>> {
    check_rows(plans, rows)?;
    let mut out = Vec::with_capacity(rows.len());
    for (plan, row) in plans.iter().zip(rows.iter()) {
        out.push(plan.from_eval(row)?);
    }
    Ok(out)
}

/// Staged coefficient-to-evaluation conversion: gathers every row's
/// chirped, padded signal into one contiguous buffer, runs the NTT /
/// pointwise / inverse-NTT kernel across the whole buffer, then scatters
/// the filtered spectra back out. Produces bit-identical results to
/// [`to_eval_rows_reference`]; only the memory movement differs.
pub fn to_eval_rows_staged(
    plans: &[Arc<BluesteinPlan>],
    rows: &[Vec<u64>],
) -> Result<Vec<Vec<u64>>> {
    check_rows(plans, rows)?;
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let _t = ScopedTimer::new(Category::Transform);
    let big_m = plans[0].big_m;
    let m = plans[0].m;
    // Gather stage: one contiguous block of `rows * M` words.
    let mut block = vec![0u64; rows.len() * big_m];
    for (r, (plan, row)) in plans.iter().zip(rows.iter()).enumerate() {
        let dst = &mut block[r * big_m..(r + 1) * big_m];
        for (k, &c) in row.iter().enumerate() {
            // Row k-th coefficient premultiplied by the chirp; positions
            // beyond m stay zero.
            dst[k] = plan.md.mul(c, plan.chirp_pos[k]);
        }
    }
    // Fused kernel stage: every NTT, pointwise product, and inverse NTT
    // walks the same contiguous allocation.
    for (r, plan) in plans.iter().enumerate() {
        let buf = &mut block[r * big_m..(r + 1) * big_m];
        ntt_dif(buf, &plan.md, &plan.pow_w);
        for (b, &k) in buf.iter_mut().zip(plan.ker_fwd_hat.iter()) {
            *b = plan.md.mul(*b, k);
        }
        ntt_dit(buf, &plan.md, &plan.pow_wi);
    }
    // Scatter stage: post-chirp, then compact the primitive positions.
    let mut out = Vec::with_capacity(rows.len());
    let mut full = vec![0u64; m];
    for (r, plan) in plans.iter().enumerate() {
        let buf = &block[r * big_m..(r + 1) * big_m];
        for j in 0..m {
            full[j] = plan
                .md
                .mul(plan.md.mul(buf[j], plan.big_m_inv), plan.chirp_pos[j]);
        }
        let mut compact = vec![0u64; plan.n];
        plan.filter_compact(&full, &mut compact);
        out.push(compact);
    }
    Ok(out)
}

/// Staged evaluation-to-coefficient conversion; the mirror image of
/// [`to_eval_rows_staged`], bit-identical to the row-by-row reference.
pub fn from_eval_rows_staged(
    plans: &[Arc<BluesteinPlan>],
    rows: &[Vec<u64>],
) -> Result<Vec<Vec<u64>>> {
    check_rows(plans, rows)?;
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let _t = ScopedTimer::new(Category::Transform);
    let big_m = plans[0].big_m;
    let m = plans[0].m;
    let mut block = vec![0u64; rows.len() * big_m];
    // Gather: scatter each compact row to full length, chirp, pad.
    let mut full = vec![0u64; m];
    for (r, (plan, row)) in plans.iter().zip(rows.iter()).enumerate() {
        plan.scatter(row, &mut full);
        let dst = &mut block[r * big_m..(r + 1) * big_m];
        for (k, &v) in full.iter().enumerate() {
            dst[k] = plan.md.mul(v, plan.chirp_neg[k]);
        }
    }
    // Fused kernel.
    for (r, plan) in plans.iter().enumerate() {
        let buf = &mut block[r * big_m..(r + 1) * big_m];
        ntt_dif(buf, &plan.md, &plan.pow_w);
        for (b, &k) in buf.iter_mut().zip(plan.ker_inv_hat.iter()) {
            *b = plan.md.mul(*b, k);
        }
        ntt_dit(buf, &plan.md, &plan.pow_wi);
    }
    // Scatter: post-chirp, inverse-DFT scale, reduce modulo Phi_m.
    let mut out = Vec::with_capacity(rows.len());
    let mut poly = vec![0u64; m];
    for (r, plan) in plans.iter().enumerate() {
        let buf = &block[r * big_m..(r + 1) * big_m];
        for j in 0..m {
            let v = plan
                .md
                .mul(plan.md.mul(buf[j], plan.big_m_inv), plan.chirp_neg[j]);
            poly[j] = plan.md.mul(v, plan.m_inv);
        }
        let mut coeffs = vec![0u64; plan.n];
        plan.reduce_mod_phi(&poly, &mut coeffs);
        out.push(coeffs);
    }
    Ok(out)
}

fn check_rows(plans: &[Arc<BluesteinPlan>], rows: &[Vec<u64>]) -> Result<()> {
    if plans.len() != rows.len() {
        return Err(Error::LengthMismatch {
            left: plans.len(),
            right: rows.len(),
            context: "plans vs rows",
        });
    }
    if let Some(first) = plans.first() {
        for plan in plans {
            if plan.m != first.m {
                return Err(Error::BasisMismatch {
                    context: "rows with different ring indices",
                });
            }
        }
        for (plan, row) in plans.iter().zip(rows.iter()) {
            if row.len() != plan.n {
                return Err(Error::BadLength {
                    expected: plan.n,
                    got: row.len(),
                    context: "row length",
                });
            }
        }
    }
    Ok(())
}

/// Process-wide cache of transform plans, keyed by `(m, q)`.
///
/// The map lock is held across plan construction, so concurrent lookups
/// of the same key build exactly once; a per-key build counter makes the
/// guarantee observable.
pub struct PlanCache {
    map: Mutex<CacheInner>,
}

struct CacheInner {
    plans: HashMap<(u64, u64), Arc<BluesteinPlan>>,
    builds: HashMap<(u64, u64), u64>,
}

impl PlanCache {
    /// Fresh empty cache (tests use private instances; production code
    /// shares [`global_plan_cache`]).
    pub fn new() -> Self {
        Self {
            map: Mutex::new(CacheInner {
                plans: HashMap::new(),
                builds: HashMap::new(),
            }),
        }
    }

    /// Returns the cached plan for `(m, q)`, building it first if absent.
    pub fn get_or_build(&self, m: u64, q: u64) -> Result<Arc<BluesteinPlan>> {
        let mut inner = self.map.lock().expect("plan cache poisoned");
        if let Some(plan) = inner.plans.get(&(m, q)) {
            return Ok(Arc::clone(plan));
        }
        let plan = Arc::new(BluesteinPlan::build(m, q)?);
        *inner.builds.entry((m, q)).or_insert(0) += 1;
        inner.plans.insert((m, q), Arc::clone(&plan));
        Ok(plan)
    }

    /// Returns the plan if present, without building.
    pub fn get(&self, m: u64, q: u64) -> Result<Arc<BluesteinPlan>> {
        let inner = self.map.lock().expect("plan cache poisoned");
        inner
            .plans
            .get(&(m, q))
            .cloned()
            .ok_or(Error::MissingPlan { m, q })
    }

    /// How many times the plan for `(m, q)` has been built (0 or 1 under
    /// correct caching).
    pub fn build_count(&self, m: u64, q: u64) -> u64 {
        let inner = self.map.lock().expect("plan cache poisoned");
        inner.builds.get(&(m, q)).copied().unwrap_or(0)
    }

    /// Total number of plan builds across all keys.
    pub fn total_builds(&self) -> u64 {
        let inner = self.map.lock().expect("plan cache poisoned");
        inner.builds.values().sum()
    }

    /// Corrupts one table entry in every cached plan (fault injection
    /// for self-tests: downstream transform checks must notice).
    /// Returns the number of plans corrupted.
    pub fn inject_fault(&self) -> usize {
        let mut inner = self.map.lock().expect("plan cache poisoned");
        let keys: Vec<(u64, u64)> = inner.plans.keys().copied().collect();
        for key in &keys {
            let mut bad = (**inner.plans.get(key).expect("key just listed")).clone();
            if bad.chirp_pos.len() > 1 {
                bad.chirp_pos[1] = bad.md.add(bad.chirp_pos[1], 1);
            }
            inner.plans.insert(*key, Arc::new(bad));
        }
        keys.len()
    }
}

impl Default for PlanCache {
    fn default() -> Self {
        Self::new()
    }
}

/// The process-wide plan cache.
pub fn global_plan_cache() -> &'static PlanCache {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    CACHE.get_or_init(PlanCache::new)
}
