//! Binary persistence for ciphertexts and client keys: a versioned
//! `UFHE1` header followed by length-prefixed little-endian residue
//! dumps. The format stores exactly what the in-memory types hold, so a
//! round trip is bit-exact; switching keys are cheap to regenerate from
//! the secret key and are deliberately not covered.

use num_bigint::BigUint;

use crate::bgv::{BgvContext, Ciphertext, PublicKey, SecretKey};
use crate::error::{Error, Result};
use crate::ring::{Rep, RingElem};

/// File magic; the trailing digit is the format version line.
pub const MAGIC: &[u8; 5] = b"UFHE1";
/// Current payload version under the `UFHE1` line.
pub const VERSION: u8 = 1;

const KIND_CIPHERTEXT: u8 = 1;
const KIND_SECRET_KEY: u8 = 2;
const KIND_PUBLIC_KEY: u8 = 3;

fn err(msg: impl Into<String>) -> Error {
    Error::Serialization(msg.into())
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new(kind: u8) -> Self {
        let mut buf = Vec::with_capacity(64);
        buf.extend_from_slice(MAGIC);
        buf.push(VERSION);
        buf.push(kind);
        Self { buf }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn bytes(&mut self, v: &[u8]) {
        self.u32(v.len() as u32);
        self.buf.extend_from_slice(v);
    }

    fn elem(&mut self, e: &RingElem) {
        self.u8(match e.rep() {
            Rep::Coeff => 0,
            Rep::Eval => 1,
        });
        self.u32(e.active() as u32);
        for i in 0..e.active() {
            let row = e.row(i);
            self.u32(row.len() as u32);
            for &v in row {
                self.u64(v);
            }
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], kind: u8) -> Result<Self> {
        let mut r = Self { buf, pos: 0 };
        let magic = r.take(MAGIC.len())?;
        if magic != MAGIC {
            return Err(err("bad magic"));
        }
        let version = r.u8()?;
        if version != VERSION {
            return Err(err(format!("unsupported version {version}")));
        }
        let got = r.u8()?;
        if got != kind {
            return Err(err(format!("expected object kind {kind}, found {got}")));
        }
        Ok(r)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(err("unexpected end of input"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    fn elem(&mut self, ctx: &BgvContext) -> Result<RingElem> {
        let rep = match self.u8()? {
            0 => Rep::Coeff,
            1 => Rep::Eval,
            other => return Err(err(format!("unknown representation tag {other}"))),
        };
        let active = self.u32()? as usize;
        let mut rows = Vec::with_capacity(active.min(1 << 10));
        for _ in 0..active {
            let len = self.u32()? as usize;
            if len != ctx.ring().n() {
                return Err(err(format!(
                    "residue row of length {len}, ring degree is {}",
                    ctx.ring().n()
                )));
            }
            let mut row = Vec::with_capacity(len);
            for _ in 0..len {
                row.push(self.u64()?);
            }
            rows.push(row);
        }
        RingElem::from_rows(ctx.ring(), rep, rows)
            .map_err(|e| err(format!("invalid residue rows: {e}")))
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(err(format!(
                "{} trailing bytes after payload",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Serializes a ciphertext (components, level, and tracked bound).
pub fn ciphertext_to_bytes(ct: &Ciphertext) -> Vec<u8> {
    let mut w = Writer::new(KIND_CIPHERTEXT);
    w.u32(ct.level() as u32);
    w.bytes(&ct.noise_bound().to_bytes_le());
    w.elem(&ct.c0);
    w.elem(&ct.c1);
    w.buf
}

/// Restores a ciphertext into `ctx`'s ring, validating the header and
/// every length along the way.
pub fn ciphertext_from_bytes(ctx: &BgvContext, bytes: &[u8]) -> Result<Ciphertext> {
    let mut r = Reader::new(bytes, KIND_CIPHERTEXT)?;
    let level = r.u32()? as usize;
    let noise = BigUint::from_bytes_le(r.bytes()?);
    let c0 = r.elem(ctx)?;
    let c1 = r.elem(ctx)?;
    r.finish()?;
    if c0.active() != c1.active() || c0.active() != level + 1 {
        return Err(err(format!(
            "level {level} inconsistent with component rows {} / {}",
            c0.active(),
            c1.active()
        )));
    }
    Ok(Ciphertext::from_parts(c0, c1, level, noise))
}

/// Serializes a secret key.
pub fn secret_key_to_bytes(sk: &SecretKey) -> Vec<u8> {
    let mut w = Writer::new(KIND_SECRET_KEY);
    w.elem(&sk.s);
    w.buf
}

/// Restores a secret key for `ctx`'s ring.
pub fn secret_key_from_bytes(ctx: &BgvContext, bytes: &[u8]) -> Result<SecretKey> {
    let mut r = Reader::new(bytes, KIND_SECRET_KEY)?;
    let s = r.elem(ctx)?;
    r.finish()?;
    Ok(SecretKey { s })
}

/// Serializes a public key.
pub fn public_key_to_bytes(pk: &PublicKey) -> Vec<u8> {
    let mut w = Writer::new(KIND_PUBLIC_KEY);
    w.elem(&pk.b);
    w.elem(&pk.a);
    w.buf
}

/// Restores a public key for `ctx`'s ring.
pub fn public_key_from_bytes(ctx: &BgvContext, bytes: &[u8]) -> Result<PublicKey> {
    let mut r = Reader::new(bytes, KIND_PUBLIC_KEY)?;
    let b = r.elem(ctx)?;
    let a = r.elem(ctx)?;
    r.finish()?;
    if b.active() != a.active() {
        return Err(err("public key components disagree on active primes"));
    }
    Ok(PublicKey { b, a })
}
