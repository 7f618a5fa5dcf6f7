//! Straight-line digit comparison circuits.
//!
//! A circuit is a list of multiplication steps over linear combinations
//! of the two inputs and earlier registers, plus output linear forms.
//! Only the `Mul` steps cost a nonscalar (ciphertext-by-ciphertext)
//! multiplication when run homomorphically; everything linear is free in
//! that currency, so the step count *is* the multiplicative cost.
//!
//! Two digit encodings are supported:
//!
//! * **Bivariate**: digits range over the full alphabet `0..p`; the
//!   less-than polynomial is evaluated through the symmetric-function
//!   substitution `s = x + y`, `q = x * y`, `z = x - y`, using the
//!   identity `z^2 = s^2 - 4q` to get the even part almost for free and
//!   a solved coefficient table for the odd part.
//! * **Univariate**: digits range over the half alphabet
//!   `0..(p+1)/2`, which keeps `x - y` inside the centered window, so
//!   a single polynomial `S(x - y)` decides the comparison.
//!
//! In both cases the equality output `1 - z^(p-1)` reuses the top power
//! register already present for less-than, so a fused less-than/equality
//! pair costs no extra multiplications.

use crate::arith::{bit_length, miller_rabin, Modulus};
use crate::error::{Error, Result};

/// Operand of a linear form.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Src {
    /// First input digit.
    X,
    /// Second input digit.
    Y,
    /// Result of an earlier multiplication step.
    Reg(usize),
}

/// A linear combination of sources plus a constant, coefficients mod p.
#[derive(Clone, Debug, Default)]
pub struct Lin {
    pub terms: Vec<(u64, Src)>,
    pub constant: u64,
}

impl Lin {
    /// The empty (zero) form.
    pub fn zero() -> Self {
        Self::default()
    }

    /// A constant form.
    pub fn constant(c: u64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    /// Adds `coef * src`, skipping zero coefficients.
    pub fn push(&mut self, coef: u64, src: Src) {
        if coef != 0 {
            self.terms.push((coef, src));
        }
    }

    fn x_minus_y(p: u64) -> Self {
        let mut l = Self::zero();
        l.push(1, Src::X);
        l.push(p - 1, Src::Y);
        l
    }

    fn x_plus_y() -> Self {
        let mut l = Self::zero();
        l.push(1, Src::X);
        l.push(1, Src::Y);
        l
    }

    fn reg(i: usize) -> Self {
        let mut l = Self::zero();
        l.push(1, Src::Reg(i));
        l
    }

    /// Number of terms whose coefficient is neither 0 nor 1 (these cost
    /// a scalar multiplication homomorphically).
    pub fn scalar_mult_count(&self) -> usize {
        self.terms.iter().filter(|&&(c, _)| c > 1).count()
    }
}

/// One multiplication step: a new register `lhs * rhs`.
#[derive(Clone, Debug)]
pub struct Step {
    pub lhs: Lin,
    pub rhs: Lin,
}

/// A straight-line program with any number of output forms.
#[derive(Clone, Debug)]
pub struct Slp {
    pub p: u64,
    pub steps: Vec<Step>,
    pub outputs: Vec<Lin>,
}

impl Slp {
    /// Nonscalar multiplication count.
    pub fn nonscalar_mults(&self) -> usize {
        self.steps.len()
    }

    /// Evaluates one linear form given inputs and register values.
    pub fn eval_lin(&self, lin: &Lin, x: u64, y: u64, regs: &[u64], md: &Modulus) -> u64 {
        let mut acc = md.reduce(lin.constant);
        for &(coef, src) in &lin.terms {
            let v = match src {
                Src::X => x,
                Src::Y => y,
                Src::Reg(i) => regs[i],
            };
            acc = md.add(acc, md.mul(md.reduce(coef), v));
        }
        acc
    }

    /// Evaluates the program on plaintext digits, returning all outputs.
    pub fn eval_plain(&self, x: u64, y: u64) -> Vec<u64> {
        let md = Modulus::new(self.p);
        let x = md.reduce(x);
        let y = md.reduce(y);
        let mut regs = Vec::with_capacity(self.steps.len());
        for step in &self.steps {
            let l = self.eval_lin(&step.lhs, x, y, &regs, &md);
            let r = self.eval_lin(&step.rhs, x, y, &regs, &md);
            regs.push(md.mul(l, r));
        }
        self.outputs
            .iter()
            .map(|o| self.eval_lin(o, x, y, &regs, &md))
            .collect()
    }

    /// Multiplicative depth: longest register-dependency chain.
    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.steps.len()];
        let lin_depth = |lin: &Lin, depth: &[usize]| {
            lin.terms
                .iter()
                .filter_map(|&(_, s)| match s {
                    Src::Reg(i) => Some(depth[i]),
                    _ => None,
                })
                .max()
                .unwrap_or(0)
        };
        for i in 0..self.steps.len() {
            let d = lin_depth(&self.steps[i].lhs, &depth).max(lin_depth(&self.steps[i].rhs, &depth));
            depth[i] = d + 1;
        }
        self.outputs
            .iter()
            .map(|o| lin_depth(o, &depth))
            .max()
            .unwrap_or(0)
    }
}

/// Which digit encoding a comparison circuit uses.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CircuitKind {
    /// Full alphabet `0..p`, bivariate polynomial.
    Bivariate,
    /// Half alphabet `0..(p+1)/2`, single polynomial in `x - y`.
    Univariate,
}

impl CircuitKind {
    pub fn name(self) -> &'static str {
        match self {
            CircuitKind::Bivariate => "bivariate",
            CircuitKind::Univariate => "univariate",
        }
    }
}

/// A fused less-than / equality circuit for one digit position.
#[derive(Clone, Debug)]
pub struct CircuitPair {
    pub kind: CircuitKind,
    /// Shared step list; both outputs read the same registers.
    pub slp: Slp,
    /// Digits must lie in `0..alphabet`.
    pub alphabet: u64,
}

impl CircuitPair {
    /// Builds and exhaustively verifies the circuit for a digit prime.
    pub fn build(p: u64, kind: CircuitKind) -> Result<Self> {
        if p < 3 || p > 61 || !miller_rabin(p) {
            return Err(Error::UnsupportedP {
                p,
                context: "digit circuits need an odd prime in 3..=61",
            });
        }
        let pair = match kind {
            CircuitKind::Bivariate => build_bivariate(p)?,
            CircuitKind::Univariate => build_univariate(p)?,
        };
        pair.verify_exhaustive()?;
        Ok(pair)
    }

    pub fn p(&self) -> u64 {
        self.slp.p
    }

    /// Nonscalar multiplications of the fused pair.
    pub fn nonscalar_mults(&self) -> usize {
        self.slp.nonscalar_mults()
    }

    /// The budget this circuit is held to.
    pub fn budget(&self) -> usize {
        match self.kind {
            CircuitKind::Bivariate => bivariate_budget(self.slp.p),
            CircuitKind::Univariate => univariate_budget(self.slp.p),
        }
    }

    /// Whether the realized count fits the budget.
    pub fn meets_budget(&self) -> bool {
        self.nonscalar_mults() <= self.budget()
    }

    /// Plaintext evaluation: `(lt, eq)` for one digit pair.
    pub fn eval_plain(&self, x: u64, y: u64) -> (u64, u64) {
        let out = self.slp.eval_plain(x, y);
        (out[0], out[1])
    }

    /// Checks every digit pair in the alphabet against the definition.
    pub fn verify_exhaustive(&self) -> Result<()> {
        for x in 0..self.alphabet {
            for y in 0..self.alphabet {
                let (lt, eq) = self.eval_plain(x, y);
                let want_lt = u64::from(x < y);
                let want_eq = u64::from(x == y);
                if lt != want_lt || eq != want_eq {
                    return Err(Error::InvalidParams(format!(
                        "digit circuit p={} {} wrong at ({x},{y}): got ({lt},{eq}), want ({want_lt},{want_eq})",
                        self.slp.p,
                        self.kind.name(),
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Budget for the bivariate circuit: `2p - 6 + ceil(log2(p-1))`.
pub fn bivariate_budget(p: u64) -> usize {
    (2 * p - 6) as usize + ceil_log2(p - 1)
}

/// Budget for the univariate circuit: `2 ceil(sqrt(p)) + 2 ceil(log2 p)`.
pub fn univariate_budget(p: u64) -> usize {
    2 * ceil_sqrt(p) + 2 * ceil_log2(p)
}

fn ceil_log2(x: u64) -> usize {
    if x <= 1 {
        0
    } else {
        bit_length(x - 1) as usize
    }
}

fn ceil_sqrt(x: u64) -> usize {
    let mut r = (x as f64).sqrt() as u64;
    while r * r < x {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= x {
        r -= 1;
    }
    r as usize
}

/// Coefficients (ascending) of the unique polynomial of degree < p with
/// `S(z) = 1` exactly when the centered representative of z is negative.
pub fn univariate_table(p: u64) -> Vec<u64> {
    let md = Modulus::new(p);
    let h = (p + 1) / 2;
    // Lagrange interpolation over all p points.
    let mut coeffs = vec![0u64; p as usize];
    for z in h..p {
        // Basis polynomial for this z, scaled by f(z) = 1.
        // l_z(x) = prod_{t != z} (x - t) / (z - t).
        let mut num = vec![1u64]; // running product of (x - t)
        let mut denom = 1u64;
        for t in 0..p {
            if t == z {
                continue;
            }
            // num *= (x - t)
            let neg_t = md.neg(md.reduce(t));
            let mut next = vec![0u64; num.len() + 1];
            for (i, &c) in num.iter().enumerate() {
                next[i] = md.add(next[i], md.mul(c, neg_t));
                next[i + 1] = md.add(next[i + 1], c);
            }
            num = next;
            denom = md.mul(denom, md.sub(md.reduce(z), md.reduce(t)));
        }
        let inv_d = md.inv(denom);
        for (i, &c) in num.iter().enumerate() {
            coeffs[i] = md.add(coeffs[i], md.mul(c, inv_d));
        }
    }
    coeffs
}

/// Builds the univariate circuit: `u = z^2`, balanced powers of `u`, and
/// one multiply by `z` for the odd part.
fn build_univariate(p: u64) -> Result<CircuitPair> {
    let md = Modulus::new(p);
    let table = univariate_table(p);
    // Structure check: even coefficients vanish except the top one.
    for (i, &c) in table.iter().enumerate() {
        if i % 2 == 0 && i + 1 != p as usize && c != 0 {
            return Err(Error::InvalidParams(format!(
                "univariate table p={p} has unexpected even coefficient at {i}"
            )));
        }
    }
    let e = ((p - 1) / 2) as usize;
    let z = Lin::x_minus_y(p);
    let mut steps = Vec::new();
    // Register 0: u = z^2.
    steps.push(Step {
        lhs: z.clone(),
        rhs: z.clone(),
    });
    // u^k for k = 2..=e, balanced: u^k = u^ceil(k/2) * u^floor(k/2).
    let mut u_reg = vec![usize::MAX; e + 1];
    u_reg[1] = 0;
    for k in 2..=e {
        let hi = u_reg[k.div_ceil(2)];
        let lo = u_reg[k / 2];
        steps.push(Step {
            lhs: Lin::reg(hi),
            rhs: Lin::reg(lo),
        });
        u_reg[k] = steps.len() - 1;
    }
    // Odd part O(u) = sum_j table[2j+1] u^j.
    let mut odd = Lin::constant(table[1]);
    for j in 1..=(p as usize - 3) / 2 {
        odd.push(md.reduce(table[2 * j + 1]), Src::Reg(u_reg[j]));
    }
    // lt = table[p-1] * u^e + z * O(u).
    let mut lt = Lin::zero();
    lt.push(md.reduce(table[p as usize - 1]), Src::Reg(u_reg[e]));
    if odd.terms.is_empty() {
        // O is constant: fold c*z straight into the output.
        let c = md.reduce(odd.constant);
        lt.push(c, Src::X);
        lt.push(md.neg(c), Src::Y);
    } else {
        steps.push(Step {
            lhs: z,
            rhs: odd,
        });
        lt.push(1, Src::Reg(steps.len() - 1));
    }
    // eq = 1 - z^(p-1) = 1 - u^e, reusing the existing top register.
    let mut eq = Lin::constant(1);
    eq.push(p - 1, Src::Reg(u_reg[e]));
    Ok(CircuitPair {
        kind: CircuitKind::Univariate,
        slp: Slp {
            p,
            steps,
            outputs: vec![lt, eq],
        },
        alphabet: (p + 1) / 2,
    })
}

/// Builds the bivariate circuit. Primes 3 and 5 get hand-shaped
/// programs; larger primes go through the symmetric-function solve, with
/// a dense interpolation fallback if that system were ever inconsistent.
fn build_bivariate(p: u64) -> Result<CircuitPair> {
    match p {
        3 => build_bivariate_3(),
        5 => build_bivariate_5(),
        _ => build_bivariate_general(p).or_else(|_| build_bivariate_lagrange(p)),
    }
}

/// p = 3: three multiplications (q, z^2, and z times a solved affine
/// form in s and q).
fn build_bivariate_3() -> Result<CircuitPair> {
    let p = 3;
    let g = solve_symmetric_odd(p, 1, 1)?;
    let z = Lin::x_minus_y(p);
    let mut steps = Vec::new();
    // Register 0: q = x * y.
    steps.push(Step {
        lhs: Lin {
            terms: vec![(1, Src::X)],
            constant: 0,
        },
        rhs: Lin {
            terms: vec![(1, Src::Y)],
            constant: 0,
        },
    });
    // Register 1: w = z^2.
    steps.push(Step {
        lhs: z.clone(),
        rhs: z.clone(),
    });
    // Register 2: z * (g00 + g10 s + g01 q).
    let mut rhs = Lin::constant(g[0][0]);
    rhs.push(g[1][0], Src::X);
    rhs.push(g[1][0], Src::Y);
    rhs.push(g[0][1], Src::Reg(0));
    steps.push(Step { lhs: z, rhs });
    // lt = inv2 * w + reg2; inv2 = 2 mod 3.
    let mut lt = Lin::zero();
    lt.push(2, Src::Reg(1));
    lt.push(1, Src::Reg(2));
    let mut eq = Lin::constant(1);
    eq.push(2, Src::Reg(1));
    Ok(CircuitPair {
        kind: CircuitKind::Bivariate,
        slp: Slp {
            p,
            steps,
            outputs: vec![lt, eq],
        },
        alphabet: p,
    })
}

/// p = 5: five multiplications via a factored odd part,
/// `lt = 3 z^4 + z (P + 4q + 4 s^2)` with
/// `P = (s^2 + 2q + 3s)(2s + 4q)` and `q` recovered freely from
/// `4 s^2 + z^2`.
fn build_bivariate_5() -> Result<CircuitPair> {
    let p = 5;
    let z = Lin::x_minus_y(p);
    let s = Lin::x_plus_y();
    let mut steps = Vec::new();
    // Register 0: z2 = z^2. Register 1: s2 = s^2.
    steps.push(Step {
        lhs: z.clone(),
        rhs: z.clone(),
    });
    steps.push(Step {
        lhs: s.clone(),
        rhs: s.clone(),
    });
    // q = 4 s2 + z2 (free). P = (s2 + 2q + 3s)(2s + 4q), expanded over
    // the registers: lhs = 4 s2 + 2 z2 + 3 s, rhs = s2 + 4 z2 + 2 s.
    let mut lhs = Lin::zero();
    lhs.push(4, Src::Reg(1));
    lhs.push(2, Src::Reg(0));
    lhs.push(3, Src::X);
    lhs.push(3, Src::Y);
    let mut rhs = Lin::zero();
    rhs.push(1, Src::Reg(1));
    rhs.push(4, Src::Reg(0));
    rhs.push(2, Src::X);
    rhs.push(2, Src::Y);
    steps.push(Step { lhs, rhs }); // register 2: P
    // Register 3: z * (P + 4q + 4 s^2) = z * (P + 4 z2)  (mod 5).
    let mut inner = Lin::zero();
    inner.push(1, Src::Reg(2));
    inner.push(4, Src::Reg(0));
    steps.push(Step {
        lhs: z,
        rhs: inner,
    });
    // Register 4: z4 = z2^2.
    steps.push(Step {
        lhs: Lin::reg(0),
        rhs: Lin::reg(0),
    });
    let mut lt = Lin::zero();
    lt.push(3, Src::Reg(4)); // inv2 mod 5 = 3
    lt.push(1, Src::Reg(3));
    let mut eq = Lin::constant(1);
    eq.push(4, Src::Reg(4));
    Ok(CircuitPair {
        kind: CircuitKind::Bivariate,
        slp: Slp {
            p,
            steps,
            outputs: vec![lt, eq],
        },
        alphabet: p,
    })
}

/// General bivariate construction for p >= 7: solve the odd part
/// G(s, q) on support s^0..s^(p-2), q^0..q^((p-1)/2), then lay out
/// `q`, a balanced s-ladder, a binary chain for `(z^2)^((p-1)/2)` with
/// `z^2 = s^2 - 4q` free, a Horner pass over q, and one multiply by z.
fn build_bivariate_general(p: u64) -> Result<CircuitPair> {
    let md = Modulus::new(p);
    let a_max = (p - 2) as usize;
    let b_max = ((p - 1) / 2) as usize;
    let g = solve_symmetric_odd(p, a_max, b_max)?;
    let z = Lin::x_minus_y(p);
    let s = Lin::x_plus_y();
    let mut steps = Vec::new();
    // Register 0: q = x * y.
    steps.push(Step {
        lhs: Lin {
            terms: vec![(1, Src::X)],
            constant: 0,
        },
        rhs: Lin {
            terms: vec![(1, Src::Y)],
            constant: 0,
        },
    });
    let q_reg = 0usize;
    // s-ladder: registers for s^2..s^a_max (balanced shape).
    let mut s_reg = vec![usize::MAX; a_max + 1];
    let s_lin = |k: usize, s_reg: &[usize]| -> Lin {
        if k == 1 {
            s.clone()
        } else {
            Lin::reg(s_reg[k])
        }
    };
    for k in 2..=a_max {
        let lhs = s_lin(k.div_ceil(2), &s_reg);
        let rhs = s_lin(k / 2, &s_reg);
        steps.push(Step { lhs, rhs });
        s_reg[k] = steps.len() - 1;
    }
    // w = z^2 = s^2 - 4q, as a free linear form over registers.
    let mut w = Lin::zero();
    w.push(1, Src::Reg(s_reg[2]));
    w.push(md.sub(0, 4), Src::Reg(q_reg));
    // Binary chain for w^e, e = (p-1)/2.
    let e = b_max as u64;
    let mut cur = w.clone();
    let nbits = bit_length(e);
    for bit in (0..nbits - 1).rev() {
        steps.push(Step {
            lhs: cur.clone(),
            rhs: cur.clone(),
        });
        cur = Lin::reg(steps.len() - 1);
        if e >> bit & 1 == 1 {
            steps.push(Step {
                lhs: cur.clone(),
                rhs: w.clone(),
            });
            cur = Lin::reg(steps.len() - 1);
        }
    }
    let w_top = cur;
    // Horner over q with coefficients C_b(s) = sum_a g[a][b] s^a.
    let c_lin = |b: usize, s_reg: &[usize]| -> Lin {
        let mut l = Lin::constant(g[0][b]);
        l.push(g[1][b], Src::X);
        l.push(g[1][b], Src::Y);
        for a in 2..=a_max {
            l.push(g[a][b], Src::Reg(s_reg[a]));
        }
        l
    };
    let mut acc = c_lin(b_max, &s_reg);
    for b in (0..b_max).rev() {
        steps.push(Step {
            lhs: acc,
            rhs: Lin::reg(q_reg),
        });
        let mut next = Lin::reg(steps.len() - 1);
        let cb = c_lin(b, &s_reg);
        next.constant = cb.constant;
        next.terms.extend(cb.terms);
        acc = next;
    }
    // z * G.
    steps.push(Step { lhs: z, rhs: acc });
    let zg_reg = steps.len() - 1;
    let inv2 = md.inv(2);
    let mut lt = Lin::zero();
    let top_reg = match w_top.terms.as_slice() {
        [(1, Src::Reg(i))] if w_top.constant == 0 => *i,
        _ => {
            return Err(Error::InvalidParams(
                "bivariate chain did not land in a register".into(),
            ))
        }
    };
    lt.push(inv2, Src::Reg(top_reg));
    lt.push(1, Src::Reg(zg_reg));
    let mut eq = Lin::constant(1);
    eq.push(p - 1, Src::Reg(top_reg));
    Ok(CircuitPair {
        kind: CircuitKind::Bivariate,
        slp: Slp {
            p,
            steps,
            outputs: vec![lt, eq],
        },
        alphabet: p,
    })
}

/// Solves for G(s, q) with s-degree <= a_max, q-degree <= b_max such
/// that for all x != y: G(s, q) = (lt01(x, y) - inv2) / z  (mod p),
/// using that z^(p-1) = 1 off the diagonal. Returns g[a][b].
fn solve_symmetric_odd(p: u64, a_max: usize, b_max: usize) -> Result<Vec<Vec<u64>>> {
    let md = Modulus::new(p);
    let cols = (a_max + 1) * (b_max + 1);
    let inv2 = md.inv(2);
    let mut rows: Vec<Vec<u64>> = Vec::with_capacity(((p - 1) * p) as usize);
    for x in 0..p {
        for y in 0..p {
            if x == y {
                continue;
            }
            let s = md.add(x, y);
            let q = md.mul(x, y);
            let z = md.sub(x, y);
            let lt01 = u64::from(x < y);
            let target = md.mul(md.sub(lt01, inv2), md.inv(z));
            let mut row = Vec::with_capacity(cols + 1);
            let mut s_pow = 1u64;
            for _a in 0..=a_max {
                let mut q_pow = 1u64;
                for _b in 0..=b_max {
                    row.push(md.mul(s_pow, q_pow));
                    q_pow = md.mul(q_pow, q);
                }
                s_pow = md.mul(s_pow, s);
            }
            row.push(target);
            rows.push(row);
        }
    }
    let sol = gauss_solve(&mut rows, cols, &md).ok_or(Error::InvalidParams(format!(
        "symmetric odd-part system inconsistent for p={p}"
    )))?;
    let mut g = vec![vec![0u64; b_max + 1]; a_max + 1];
    for a in 0..=a_max {
        for b in 0..=b_max {
            g[a][b] = sol[a * (b_max + 1) + b];
        }
    }
    Ok(g)
}

/// Gauss-Jordan elimination on an augmented system over F_p; returns a
/// particular solution with free variables set to zero, or None if
/// inconsistent.
fn gauss_solve(rows: &mut [Vec<u64>], cols: usize, md: &Modulus) -> Option<Vec<u64>> {
    let mut pivot_of_col = vec![usize::MAX; cols];
    let mut rank = 0usize;
    for col in 0..cols {
        let Some(pr) = (rank..rows.len()).find(|&r| rows[r][col] != 0) else {
            continue;
        };
        rows.swap(rank, pr);
        let inv = md.inv(rows[rank][col]);
        for v in rows[rank].iter_mut() {
            *v = md.mul(*v, inv);
        }
        for r in 0..rows.len() {
            if r != rank && rows[r][col] != 0 {
                let f = rows[r][col];
                for c in col..=cols {
                    let sub = md.mul(f, rows[rank][c]);
                    rows[r][c] = md.sub(rows[r][c], sub);
                }
            }
        }
        pivot_of_col[col] = rank;
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    // Consistency: no row 0 = nonzero.
    for row in rows.iter().skip(rank) {
        if row[..cols].iter().all(|&v| v == 0) && row[cols] != 0 {
            return None;
        }
    }
    let mut sol = vec![0u64; cols];
    for col in 0..cols {
        if pivot_of_col[col] != usize::MAX {
            sol[col] = rows[pivot_of_col[col]][cols];
        }
    }
    Some(sol)
}

/// Dense interpolation fallback: x-powers, y-powers, and one product
/// per x-power row; exactly 3p - 5 multiplications. The equality output
/// appends a binary chain for z^(p-1).
fn build_bivariate_lagrange(p: u64) -> Result<CircuitPair> {
    let md = Modulus::new(p);
    // c[i][j] with lt01(x,y) = sum c_ij x^i y^j.
    let mut by_x: Vec<Vec<u64>> = Vec::with_capacity(p as usize);
    for x in 0..p {
        let values: Vec<u64> = (0..p).map(|y| u64::from(x < y)).collect();
        by_x.push(interpolate(&values, &md));
    }
    let mut c = vec![vec![0u64; p as usize]; p as usize];
    for j in 0..p as usize {
        let col: Vec<u64> = (0..p as usize).map(|x| by_x[x][j]).collect();
        let coeffs = interpolate(&col, &md);
        for (i, &v) in coeffs.iter().enumerate() {
            c[i][j] = v;
        }
    }
    let mut steps = Vec::new();
    // Power ladders x^2..x^(p-1), y^2..y^(p-1).
    let x1 = Lin {
        terms: vec![(1, Src::X)],
        constant: 0,
    };
    let y1 = Lin {
        terms: vec![(1, Src::Y)],
        constant: 0,
    };
    let mut x_reg = vec![usize::MAX; p as usize];
    let mut y_reg = vec![usize::MAX; p as usize];
    let pow_lin = |k: usize, reg: &[usize], base: &Lin| -> Lin {
        if k == 1 {
            base.clone()
        } else {
            Lin::reg(reg[k])
        }
    };
    for k in 2..p as usize {
        let lhs = pow_lin(k.div_ceil(2), &x_reg, &x1);
        let rhs = pow_lin(k / 2, &x_reg, &x1);
        steps.push(Step { lhs, rhs });
        x_reg[k] = steps.len() - 1;
    }
    for k in 2..p as usize {
        let lhs = pow_lin(k.div_ceil(2), &y_reg, &y1);
        let rhs = pow_lin(k / 2, &y_reg, &y1);
        steps.push(Step { lhs, rhs });
        y_reg[k] = steps.len() - 1;
    }
    // Row products x^i * (sum_j c_ij y^j) for i >= 1.
    let row_lin = |i: usize, y_reg: &[usize]| -> Lin {
        let mut l = Lin::constant(c[i][0]);
        l.push(c[i][1], Src::Y);
        for j in 2..p as usize {
            l.push(c[i][j], Src::Reg(y_reg[j]));
        }
        l
    };
    let mut lt = row_lin(0, &y_reg);
    for i in 1..p as usize {
        steps.push(Step {
            lhs: pow_lin(i, &x_reg, &x1),
            rhs: row_lin(i, &y_reg),
        });
        lt.push(1, Src::Reg(steps.len() - 1));
    }
    // Equality: binary chain for z^(p-1) on top.
    let z = Lin::x_minus_y(p);
    let e = p - 1;
    let mut cur = z.clone();
    let nbits = bit_length(e);
    for bit in (0..nbits - 1).rev() {
        steps.push(Step {
            lhs: cur.clone(),
            rhs: cur.clone(),
        });
        cur = Lin::reg(steps.len() - 1);
        if e >> bit & 1 == 1 {
            steps.push(Step {
                lhs: cur.clone(),
                rhs: z.clone(),
            });
            cur = Lin::reg(steps.len() - 1);
        }
    }
    let mut eq = Lin::constant(1);
    match cur.terms.as_slice() {
        [(1, Src::Reg(i))] => eq.push(p - 1, Src::Reg(*i)),
        _ => {
            return Err(Error::InvalidParams(
                "equality chain did not land in a register".into(),
            ))
        }
    }
    Ok(CircuitPair {
        kind: CircuitKind::Bivariate,
        slp: Slp {
            p,
            steps,
            outputs: vec![lt, eq],
        },
        alphabet: p,
    })
}

/// Interpolates values at points 0..p-1 into ascending coefficients.
fn interpolate(values: &[u64], md: &Modulus) -> Vec<u64> {
    let p = md.q();
    let mut coeffs = vec![0u64; p as usize];
    for (zi, &fz) in values.iter().enumerate() {
        if fz == 0 {
            continue;
        }
        let z = zi as u64;
        let mut num = vec![1u64];
        let mut denom = 1u64;
        for t in 0..p {
            if t == z {
                continue;
            }
            let neg_t = md.neg(md.reduce(t));
            let mut next = vec![0u64; num.len() + 1];
            for (i, &cc) in num.iter().enumerate() {
                next[i] = md.add(next[i], md.mul(cc, neg_t));
                next[i + 1] = md.add(next[i + 1], cc);
            }
            num = next;
            denom = md.mul(denom, md.sub(md.reduce(z), t));
        }
        let scale = md.mul(md.reduce(fz), md.inv(denom));
        for (i, &cc) in num.iter().enumerate() {
            coeffs[i] = md.add(coeffs[i], md.mul(cc, scale));
        }
    }
    coeffs
}

/// Builds a Paterson-Stockmeyer evaluation program for an arbitrary
/// polynomial (ascending coefficients) applied to the X input. The
/// step count is at most `2 ceil(sqrt(deg + 1)) + ceil(log2 deg)`.
pub fn poly_eval_ps(p: u64, coeffs: &[u64]) -> Result<Slp> {
    if coeffs.is_empty() {
        return Err(Error::BadLength {
            expected: 1,
            got: 0,
            context: "polynomial coefficients",
        });
    }
    let md = Modulus::new(p);
    let deg = coeffs.len() - 1;
    if deg <= 1 {
        let mut out = Lin::constant(md.reduce(coeffs[0]));
        if deg == 1 {
            out.push(md.reduce(coeffs[1]), Src::X);
        }
        return Ok(Slp {
            p,
            steps: Vec::new(),
            outputs: vec![out],
        });
    }
    let k = ceil_sqrt(deg as u64 + 1);
    let x1 = Lin {
        terms: vec![(1, Src::X)],
        constant: 0,
    };
    let mut steps = Vec::new();
    let mut x_reg = vec![usize::MAX; k + 1];
    let pow_lin = |j: usize, reg: &[usize], base: &Lin| -> Lin {
        if j == 1 {
            base.clone()
        } else {
            Lin::reg(reg[j])
        }
    };
    for j in 2..=k {
        let lhs = pow_lin(j.div_ceil(2), &x_reg, &x1);
        let rhs = pow_lin(j / 2, &x_reg, &x1);
        steps.push(Step { lhs, rhs });
        x_reg[j] = steps.len() - 1;
    }
    let big = Lin::reg(x_reg[k]); // x^k
    // Blocks B_t(x) = sum_{j < k} coeffs[t*k + j] x^j, Horner in x^k.
    let blocks = deg / k + 1;
    let block_lin = |t: usize| -> Lin {
        let mut l = Lin::zero();
        for j in 0..k {
            let idx = t * k + j;
            if idx > deg {
                break;
            }
            let cc = md.reduce(coeffs[idx]);
            if j == 0 {
                l.constant = cc;
            } else if j == 1 {
                l.push(cc, Src::X);
            } else {
                l.push(cc, Src::Reg(x_reg[j]));
            }
        }
        l
    };
    let mut acc = block_lin(blocks - 1);
    for t in (0..blocks - 1).rev() {
        steps.push(Step {
            lhs: acc,
            rhs: big.clone(),
        });
        let mut next = Lin::reg(steps.len() - 1);
        let bt = block_lin(t);
        next.constant = bt.constant;
        next.terms.extend(bt.terms);
        acc = next;
    }
    Ok(Slp {
        p,
        steps,
        outputs: vec![acc],
    })
}
