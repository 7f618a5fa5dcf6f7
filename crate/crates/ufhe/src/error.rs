//! Error type shared by every module of the library.
//!
//! All fallible public operations return [`Result`] with this crate-wide
//! [`Error`] enum. Variants carry enough context to diagnose a failure
//! without a debugger: offending sizes, moduli, levels, and indices are
//! embedded in the message.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Every failure mode surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Prime generation exhausted its search range before finding enough
    /// usable primes.
    #[error("not enough primes: found {found} of {wanted} with {bits} bits for step {step}")]
    NotEnoughPrimes {
        found: usize,
        wanted: usize,
        bits: u32,
        step: u64,
    },

    /// A primitive root of the requested order cannot exist because the
    /// order does not divide q - 1.
    #[error("order {order} does not divide q - 1 = {q_minus_1}")]
    OrderNotDividing { order: u64, q_minus_1: u64 },

    /// A slice argument had the wrong length.
    #[error("bad length: expected {expected}, got {got} ({context})")]
    BadLength {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    /// A transform was requested for a (m, q) pair with no prepared plan.
    #[error("missing transform plan for m = {m}, q = {q}")]
    MissingPlan { m: u64, q: u64 },

    /// Two ring elements in different representations were combined.
    #[error("representation mismatch: {left} vs {right}")]
    RepMismatch {
        left: &'static str,
        right: &'static str,
    },

    /// Two ring elements over different RNS bases were combined.
    #[error("RNS basis mismatch ({context})")]
    BasisMismatch { context: &'static str },

    /// The padded convolution length is too small for the ring index m.
    #[error("pad length {pad} too small for m = {m} (need a power of two >= 2m - 1)")]
    BasisTooSmall { pad: usize, m: u64 },

    /// The plaintext modulus p must not divide the ring index m.
    #[error("p = {p} and m = {m} are not coprime")]
    NotCoprime { p: u64, m: u64 },

    /// The product of the candidate slot factors failed to reproduce the
    /// cyclotomic polynomial.
    #[error("slot factorization mismatch for p = {p}, m = {m}: {detail}")]
    FactorizationMismatch { p: u64, m: u64, detail: String },

    /// A slot-vector argument did not match the plaintext space slot count.
    #[error("wrong slot count: expected {expected}, got {got}")]
    WrongSlotCount { expected: usize, got: usize },

    /// A digit or scalar was outside its allowed range.
    #[error("value {value} out of range for {what} (max {max})")]
    OutOfRange {
        value: u64,
        what: &'static str,
        max: u64,
    },

    /// Two ciphertexts at different levels were combined without alignment.
    #[error("level mismatch: {left} vs {right}")]
    LevelMismatch { left: usize, right: usize },

    /// An operation needed to drop a level but the ciphertext is already at
    /// the last level.
    #[error("out of levels: ciphertext is at level 0 and cannot be switched down")]
    OutOfLevels,

    /// A rotation required a Galois key that was not generated.
    #[error("missing Galois key for element {element}")]
    MissingGaloisKey { element: u64 },

    /// The tracked noise bound reached the decryption threshold.
    #[error("noise budget exhausted: bound has {bound_bits} bits, threshold has {threshold_bits} bits")]
    NoiseBudgetExhausted {
        bound_bits: u64,
        threshold_bits: u64,
    },

    /// A comparison circuit was requested for an unsupported plaintext prime.
    #[error("unsupported plaintext prime p = {p} ({context})")]
    UnsupportedP { p: u64, context: &'static str },

    /// A digit outside the circuit alphabet was supplied.
    #[error("digit {digit} outside alphabet [0, {alphabet}) for p = {p}")]
    AlphabetViolation { digit: u64, alphabet: u64, p: u64 },

    /// A worker thread panicked while running a job.
    #[error("worker panicked while running job {job_index}")]
    WorkerPanic { job_index: usize },

    /// Two sequences that must have equal lengths did not.
    #[error("length mismatch: {left} vs {right} ({context})")]
    LengthMismatch {
        left: usize,
        right: usize,
        context: &'static str,
    },

    /// The result of an asynchronous comparison was claimed twice.
    #[error("comparison handle already consumed")]
    AlreadyConsumed,

    /// An asynchronous comparison failed; the underlying error is attached.
    #[error("comparison failed: {source}")]
    ComparisonFailed {
        #[source]
        source: Box<Error>,
    },

    /// A capacity or budget was exceeded (packing, compaction, scratch).
    #[error("capacity exceeded: {context} (needed {needed}, available {available})")]
    CapacityExceeded {
        context: &'static str,
        needed: usize,
        available: usize,
    },

    /// A parameter set failed validation.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A serialized blob was malformed or version-incompatible.
    #[error("serialization error: {0}")]
    Serialization(String),
}
