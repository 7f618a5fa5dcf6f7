//! Double-CRT ring elements: residue rows over an RNS prime chain, each
//! row convertible between coefficient and evaluation representation.
//!
//! An element of `Z_Q[x] / Phi_m(x)` with `Q = q_0 * ... * q_j` is stored
//! as one length-`n` row per active prime. Rows are kept either as
//! polynomial coefficients or as compact evaluations at the primitive
//! m-th roots; additions work in both representations, multiplication
//! requires the evaluation form where it is pointwise. The active prime
//! count shrinks as the encryption layer switches moduli; rows always
//! form a prefix of the context's full basis.

use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_traits::Zero;

use crate::arith::RnsBasis;
use crate::error::{Error, Result};
use crate::metrics::{Category, ScopedTimer};
use crate::rng::SplitRng;
use crate::transform::{
    from_eval_rows_staged, to_eval_rows_staged, BluesteinPlan, PlanCache,
};

/// Representation of a ring element's rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rep {
    /// Polynomial coefficients, degree < n, lowest first.
    Coeff,
    /// Compact evaluations at primitive m-th roots, ascending exponent.
    Eval,
}

impl Rep {
    fn name(self) -> &'static str {
        match self {
            Rep::Coeff => "coeff",
            Rep::Eval => "eval",
        }
    }
}

/// Shared immutable data for one ring: the RNS basis and one transform
/// plan per basis prime.
#[derive(Debug)]
pub struct RingContext {
    m: u64,
    n: usize,
    basis: Arc<RnsBasis>,
    plans: Vec<Arc<BluesteinPlan>>,
}

impl RingContext {
    /// Assembles a context, fetching (or building) the transform plan for
    /// every basis prime from `cache`.
    pub fn new(m: u64, basis: Arc<RnsBasis>, cache: &PlanCache) -> Result<Arc<Self>> {
        let mut plans = Vec::with_capacity(basis.len());
        for &q in &basis.primes() {
            plans.push(cache.get_or_build(m, q)?);
        }
        let n = plans[0].n();
        Ok(Arc::new(Self { m, n, basis, plans }))
    }

    /// Ring index m.
    pub fn m(&self) -> u64 {
        self.m
    }

    /// Ring degree n = phi(m).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total primes in the full basis.
    pub fn max_levels(&self) -> usize {
        self.basis.len()
    }

    /// The underlying RNS basis.
    pub fn basis(&self) -> &Arc<RnsBasis> {
        &self.basis
    }

    /// Transform plan for basis prime `i`.
    pub fn plan(&self, i: usize) -> &Arc<BluesteinPlan> {
        &self.plans[i]
    }

    /// Permutation realizing the Galois map `f(x) -> f(x^t)` on compact
    /// evaluation vectors: entry `dst` holds the source index for `dst`.
    /// `t` must be coprime to m.
    pub fn automorphism_perm(&self, t: u64) -> Result<Vec<usize>> {
        if crate::arith::gcd(t % self.m, self.m) != 1 {
            return Err(Error::InvalidParams(format!(
                "automorphism exponent {t} not coprime to m = {}",
                self.m
            )));
        }
        let plan = &self.plans[0];
        let positions = plan.coprime_positions();
        // Inverse map: exponent j -> compact index.
        let mut index_of = vec![usize::MAX; self.m as usize];
        for (idx, &j) in positions.iter().enumerate() {
            index_of[j] = idx;
        }
        let mut perm = vec![0usize; self.n];
        for (dst, &j) in positions.iter().enumerate() {
            let src_exp = (j as u64 * t) % self.m;
            perm[dst] = index_of[src_exp as usize];
        }
        Ok(perm)
    }
}

/// A ring element: one residue row per active basis prime.
#[derive(Debug, Clone)]
pub struct RingElem {
    ctx: Arc<RingContext>,
    rep: Rep,
    rows: Vec<Vec<u64>>,
}

impl PartialEq for RingElem {
    /// Residue-exact equality: same representation and identical rows.
    fn eq(&self, other: &Self) -> bool {
        self.rep == other.rep && self.rows == other.rows
    }
}

impl Eq for RingElem {}

impl RingElem {
    /// The all-zero element over the first `active` primes.
    pub fn zero(ctx: &Arc<RingContext>, active: usize, rep: Rep) -> Self {
        assert!(active >= 1 && active <= ctx.max_levels());
        let n = ctx.n();
        Self {
            ctx: Arc::clone(ctx),
            rep,
            rows: vec![vec![0u64; n]; active],
        }
    }

    /// Builds a coefficient-form element from signed coefficients
    /// (length at most n; missing high coefficients are zero).
    pub fn from_signed_coeffs(
        ctx: &Arc<RingContext>,
        coeffs: &[i64],
        active: usize,
    ) -> Result<Self> {
        if coeffs.len() > ctx.n() {
            return Err(Error::BadLength {
                expected: ctx.n(),
                got: coeffs.len(),
                context: "signed coefficients",
            });
        }
        let mut elem = Self::zero(ctx, active, Rep::Coeff);
        for (i, row) in elem.rows.iter_mut().enumerate() {
            let md = ctx.basis.modulus(i);
            for (k, &c) in coeffs.iter().enumerate() {
                row[k] = md.reduce_i64(c);
            }
        }
        Ok(elem)
    }

    /// Builds an element from explicit residue rows (row `i` modulo basis
    /// prime `i`).
    pub fn from_rows(ctx: &Arc<RingContext>, rep: Rep, rows: Vec<Vec<u64>>) -> Result<Self> {
        if rows.is_empty() || rows.len() > ctx.max_levels() {
            return Err(Error::BadLength {
                expected: ctx.max_levels(),
                got: rows.len(),
                context: "residue rows",
            });
        }
        for row in &rows {
            if row.len() != ctx.n() {
                return Err(Error::BadLength {
                    expected: ctx.n(),
                    got: row.len(),
                    context: "residue row length",
                });
            }
        }
        Ok(Self {
            ctx: Arc::clone(ctx),
            rep,
            rows,
        })
    }

    /// Uniformly random element in evaluation form (fresh randomness per
    /// prime row).
    pub fn random_uniform(ctx: &Arc<RingContext>, active: usize, rng: &mut SplitRng) -> Self {
        let mut elem = Self::zero(ctx, active, Rep::Eval);
        for (i, row) in elem.rows.iter_mut().enumerate() {
            rng.fill_uniform_mod(row, ctx.basis.modulus(i).q());
        }
        elem
    }

    /// Element with ternary coefficients drawn from `rng`.
    pub fn random_ternary(ctx: &Arc<RingContext>, active: usize, rng: &mut SplitRng) -> Self {
        let coeffs: Vec<i64> = (0..ctx.n()).map(|_| rng.ternary()).collect();
        Self::from_signed_coeffs(ctx, &coeffs, active).expect("length is n")
    }

    /// Element with error-distribution coefficients drawn from `rng`;
    /// also returns the coefficients for noise accounting.
    pub fn random_error(
        ctx: &Arc<RingContext>,
        active: usize,
        rng: &mut SplitRng,
    ) -> (Self, Vec<i64>) {
        let coeffs: Vec<i64> = (0..ctx.n()).map(|_| rng.error_coeff()).collect();
        let elem = Self::from_signed_coeffs(ctx, &coeffs, active).expect("length is n");
        (elem, coeffs)
    }

    /// Current representation.
    pub fn rep(&self) -> Rep {
        self.rep
    }

    /// Number of active primes.
    pub fn active(&self) -> usize {
        self.rows.len()
    }

    /// Shared context.
    pub fn ctx(&self) -> &Arc<RingContext> {
        &self.ctx
    }

    /// Residue row `i` (modulo basis prime `i`).
    pub fn row(&self, i: usize) -> &[u64] {
        &self.rows[i]
    }

    /// Mutable residue row `i`.
    pub fn row_mut(&mut self, i: usize) -> &mut [u64] {
        &mut self.rows[i]
    }

    /// Converts to evaluation form in place (no-op if already there).
    pub fn to_eval(&mut self) -> Result<()> {
        if self.rep == Rep::Eval {
            return Ok(());
        }
        let plans: Vec<Arc<BluesteinPlan>> = (0..self.rows.len())
            .map(|i| Arc::clone(self.ctx.plan(i)))
            .collect();
        self.rows = to_eval_rows_staged(&plans, &self.rows)?;
        self.rep = Rep::Eval;
        Ok(())
    }

    /// Converts to coefficient form in place (no-op if already there).
    pub fn to_coeff(&mut self) -> Result<()> {
        if self.rep == Rep::Coeff {
            return Ok(());
        }
        let plans: Vec<Arc<BluesteinPlan>> = (0..self.rows.len())
            .map(|i| Arc::clone(self.ctx.plan(i)))
            .collect();
        self.rows = from_eval_rows_staged(&plans, &self.rows)?;
        self.rep = Rep::Coeff;
        Ok(())
    }

    /// Clone converted to the requested representation.
    pub fn in_rep(&self, rep: Rep) -> Result<Self> {
        let mut c = self.clone();
        match rep {
            Rep::Eval => c.to_eval()?,
            Rep::Coeff => c.to_coeff()?,
        }
        Ok(c)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if !Arc::ptr_eq(&self.ctx, &other.ctx) {
            return Err(Error::BasisMismatch {
                context: "elements from different ring contexts",
            });
        }
        if self.rep != other.rep {
            return Err(Error::RepMismatch {
                left: self.rep.name(),
                right: other.rep.name(),
            });
        }
        if self.rows.len() != other.rows.len() {
            return Err(Error::LevelMismatch {
                left: self.rows.len(),
                right: other.rows.len(),
            });
        }
        Ok(())
    }

    /// Pointwise / coefficientwise sum.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let _t = ScopedTimer::new(Category::Elementwise);
        let mut out = self.clone();
        for (i, row) in out.rows.iter_mut().enumerate() {
            let md = self.ctx.basis.modulus(i);
            for (a, &b) in row.iter_mut().zip(other.rows[i].iter()) {
                *a = md.add(*a, b);
            }
        }
        Ok(out)
    }

    /// Difference.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let _t = ScopedTimer::new(Category::Elementwise);
        let mut out = self.clone();
        for (i, row) in out.rows.iter_mut().enumerate() {
            let md = self.ctx.basis.modulus(i);
            for (a, &b) in row.iter_mut().zip(other.rows[i].iter()) {
                *a = md.sub(*a, b);
            }
        }
        Ok(out)
    }

    /// Negation.
    pub fn neg(&self) -> Self {
        let _t = ScopedTimer::new(Category::Elementwise);
        let mut out = self.clone();
        for (i, row) in out.rows.iter_mut().enumerate() {
            let md = self.ctx.basis.modulus(i);
            for a in row.iter_mut() {
                *a = md.neg(*a);
            }
        }
        out
    }

    /// Ring product; both operands must be in evaluation form, where the
    /// product is pointwise per prime row.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        if self.rep != Rep::Eval {
            return Err(Error::RepMismatch {
                left: self.rep.name(),
                right: "eval (required for multiplication)",
            });
        }
        let _t = ScopedTimer::new(Category::Elementwise);
        let mut out = self.clone();
        for (i, row) in out.rows.iter_mut().enumerate() {
            let md = self.ctx.basis.modulus(i);
            for (a, &b) in row.iter_mut().zip(other.rows[i].iter()) {
                *a = md.mul(*a, b);
            }
        }
        Ok(out)
    }

    /// Multiplies by an integer scalar (reduced per prime).
    pub fn mul_scalar(&self, c: u64) -> Self {
        let _t = ScopedTimer::new(Category::Elementwise);
        let mut out = self.clone();
        for (i, row) in out.rows.iter_mut().enumerate() {
            let md = self.ctx.basis.modulus(i);
            let cr = md.reduce(c);
            for a in row.iter_mut() {
                *a = md.mul(*a, cr);
            }
        }
        out
    }

    /// Drops the last active prime row (used by modulus switching).
    pub fn drop_last_level(&mut self) -> Result<Vec<u64>> {
        if self.rows.len() == 1 {
            return Err(Error::OutOfLevels);
        }
        Ok(self.rows.pop().expect("nonempty"))
    }

    /// Truncates to the first `active` rows; `active` must not grow.
    pub fn truncate_levels(&mut self, active: usize) -> Result<()> {
        if active == 0 || active > self.rows.len() {
            return Err(Error::LevelMismatch {
                left: self.rows.len(),
                right: active,
            });
        }
        self.rows.truncate(active);
        Ok(())
    }

    /// Applies an evaluation-domain permutation (from
    /// [`RingContext::automorphism_perm`]) to every row.
    pub fn apply_perm(&self, perm: &[usize]) -> Result<Self> {
        if self.rep != Rep::Eval {
            return Err(Error::RepMismatch {
                left: self.rep.name(),
                right: "eval (required for automorphism)",
            });
        }
        if perm.len() != self.ctx.n() {
            return Err(Error::BadLength {
                expected: self.ctx.n(),
                got: perm.len(),
                context: "automorphism permutation",
            });
        }
        let _t = ScopedTimer::new(Category::Elementwise);
        let mut out = self.clone();
        for (i, row) in out.rows.iter_mut().enumerate() {
            let src = &self.rows[i];
            for (dst, &s) in row.iter_mut().zip(perm.iter()) {
                *dst = src[s];
            }
        }
        Ok(out)
    }

    /// CRT-composes every coefficient over the active prefix into a
    /// centered big integer; requires coefficient form.
    pub fn compose_coeffs_centered(&self) -> Result<Vec<BigInt>> {
        if self.rep != Rep::Coeff {
            return Err(Error::RepMismatch {
                left: self.rep.name(),
                right: "coeff (required for composition)",
            });
        }
        let _t = ScopedTimer::new(Category::Crt);
        let active = self.rows.len();
        let n = self.ctx.n();
        let mut out = Vec::with_capacity(n);
        let mut residues = vec![0u64; active];
        for k in 0..n {
            for i in 0..active {
                residues[i] = self.rows[i][k];
            }
            out.push(self.ctx.basis.compose_centered(&residues));
        }
        Ok(out)
    }

    /// Infinity norm of the centered coefficient vector.
    pub fn coeff_inf_norm(&self) -> Result<BigUint> {
        let coeffs = self.compose_coeffs_centered()?;
        let mut best = BigUint::zero();
        for c in coeffs {
            let mag = c.magnitude().clone();
            if mag > best {
                best = mag;
            }
        }
        Ok(best)
    }
}
