//! Non-blocking comparison: deferred handles that evaluate on a helper
//! thread while the caller keeps issuing homomorphic work, plus the
//! straightlined private-query pattern built on top of them.
//!
//! Every homomorphic operation here is a pure function of its operand
//! values, so the helper and the main path can interleave freely and
//! still produce byte-identical ciphertexts; a blocking mode runs the
//! same closure inline at spawn time, which serializes the schedule and
//! makes equality assertions against the overlapped run meaningful.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crate::bgv::Ciphertext;
use crate::compare::lex::BlockVerdicts;
use crate::compare::CompareEngine;
use crate::error::{Error, Result};
use crate::metrics::OpCounter;

/// Which verdict a deferred comparison should deliver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareKind {
    Eq,
    Lt,
}

/// The query tag values the private-query pattern dispatches on.
pub const TAG_ADD: u64 = 0;
pub const TAG_MULT: u64 = 1;
pub const TAG_POWER: u64 = 2;

enum JobState<T> {
    Ready((Result<T>, OpCounter)),
    Pending(JoinHandle<(Result<T>, OpCounter)>),
    Consumed,
}

/// Internal single-consumer handle, generic over the payload.
struct Deferred<T> {
    state: JobState<T>,
    started: Instant,
    finished: Option<Instant>,
    counter: OpCounter,
}

impl<T> Deferred<T> {
    fn spawn<F>(nonblocking: bool, job: F) -> Self
    where
        F: FnOnce(&mut OpCounter) -> Result<T> + Send + 'static,
        T: Send + 'static,
    {
        let started = Instant::now();
        let run = move || {
            let mut counter = OpCounter::new();
            let res = match catch_unwind(AssertUnwindSafe(|| job(&mut counter))) {
                Ok(r) => r,
                Err(_) => Err(Error::WorkerPanic { job_index: 0 }),
            };
            (res, counter)
        };
        if nonblocking {
            let join = std::thread::Builder::new()
                .name("compare-helper".into())
                .spawn(run)
                .expect("helper thread spawns");
            Self {
                state: JobState::Pending(join),
                started,
                finished: None,
                counter: OpCounter::new(),
            }
        } else {
            let result = run();
            Self {
                state: JobState::Ready(result),
                started,
                finished: Some(Instant::now()),
                counter: OpCounter::new(),
            }
        }
    }

    fn wait(&mut self) -> Result<T> {
        let state = std::mem::replace(&mut self.state, JobState::Consumed);
        let (res, counter) = match state {
            JobState::Consumed => return Err(Error::AlreadyConsumed),
            JobState::Ready(r) => r,
            JobState::Pending(join) => match join.join() {
                Ok(r) => r,
                Err(_) => (Err(Error::WorkerPanic { job_index: 0 }), OpCounter::new()),
            },
        };
        if self.finished.is_none() {
            self.finished = Some(Instant::now());
        }
        self.counter = counter;
        res.map_err(|e| match e {
            e @ Error::AlreadyConsumed | e @ Error::ComparisonFailed { .. } => e,
            other => Error::ComparisonFailed {
                source: Box::new(other),
            },
        })
    }

    fn elapsed(&self) -> Option<Duration> {
        self.finished.map(|f| f - self.started)
    }
}

/// A single-consumer handle to a comparison in flight.
pub struct CompareHandle {
    inner: Deferred<Ciphertext>,
}

impl CompareHandle {
    /// Blocks until the result is available and hands it over; a second
    /// call fails with `AlreadyConsumed`, and a failure on the helper
    /// side surfaces as `ComparisonFailed`.
    pub fn wait(&mut self) -> Result<Ciphertext> {
        self.inner.wait()
    }

    /// Wall-clock from spawn to completion, once finished.
    pub fn elapsed(&self) -> Option<Duration> {
        self.inner.elapsed()
    }

    /// Operation counts of the deferred job (populated by `wait`).
    pub fn counter(&self) -> &OpCounter {
        &self.inner.counter
    }
}

/// Detailed outcome of one private query, for overlap measurements.
pub struct QueryRun {
    pub result: Ciphertext,
    /// Time the branch-indicator leg took (its own clock).
    pub helper: Duration,
    /// Time the data legs took on the calling thread.
    pub main: Duration,
    /// End-to-end time including the join and the final combine.
    pub total: Duration,
}

/// Front end for deferred comparisons over one engine.
pub struct ComparePipeline {
    engine: Arc<CompareEngine>,
    nonblocking: bool,
}

impl ComparePipeline {
    /// `nonblocking = false` serializes every spawned job at spawn time
    /// (deterministic schedule); `true` runs it on a helper thread.
    pub fn new(engine: Arc<CompareEngine>, nonblocking: bool) -> Self {
        Self {
            engine,
            nonblocking,
        }
    }

    pub fn engine(&self) -> &Arc<CompareEngine> {
        &self.engine
    }

    pub fn nonblocking(&self) -> bool {
        self.nonblocking
    }

    /// Schedules a packed `k`-digit comparison and returns immediately;
    /// the caller may keep issuing unrelated homomorphic operations
    /// until `wait`.
    pub fn spawn_compare(
        &self,
        kind: CompareKind,
        a: &Ciphertext,
        b: &Ciphertext,
        k: usize,
    ) -> CompareHandle {
        let engine = Arc::clone(&self.engine);
        let (a, b) = (a.clone(), b.clone());
        CompareHandle {
            inner: Deferred::spawn(self.nonblocking, move |counter| {
                let BlockVerdicts { lt, eq } = engine.compare_packed(&a, &b, k, counter)?;
                Ok(match kind {
                    CompareKind::Lt => lt,
                    CompareKind::Eq => eq,
                })
            }),
        }
    }

    /// The three tag indicators `[q = add]`, `[q = mult]`, `[q = power]`
    /// as slotwise 0/1 ciphertexts.
    fn tag_indicators(
        engine: &CompareEngine,
        q: &Ciphertext,
        counter: &mut OpCounter,
    ) -> Result<Vec<Ciphertext>> {
        let ctx = engine.ctx();
        let p = engine.params().p;
        let mut inds = Vec::with_capacity(3);
        for tag in [TAG_ADD, TAG_MULT, TAG_POWER] {
            let shifted = ctx.sub_plain(q, &engine.const_poly(tag)?)?;
            let pw = engine.pow_const(&shifted, p - 1, counter)?;
            inds.push(ctx.add_plain(&ctx.neg(&pw), &engine.const_poly(1)?)?);
        }
        Ok(inds)
    }

    /// The straightlined private query: the helper leg computes the
    /// three tag indicators `[q = t]` while the calling thread computes
    /// all three data legs (`data + op1`, `data * op1`, `data^op2`);
    /// after the join, one masked sum selects the branch the encrypted
    /// tag asked for. The decrypted result equals the plaintext-chosen
    /// branch, and the ciphertext does not depend on the schedule.
    pub fn private_query(
        &self,
        q: &Ciphertext,
        op1: &Ciphertext,
        op2: u64,
        data: &Ciphertext,
        counter: &mut OpCounter,
    ) -> Result<QueryRun> {
        let t0 = Instant::now();
        let engine = Arc::clone(&self.engine);
        let qc = q.clone();
        // Branch evaluation leg.
        let mut branch = Deferred::spawn(self.nonblocking, move |c| {
            Self::tag_indicators(&engine, &qc, c)
        });
        // Main path: all three data legs.
        let main_start = Instant::now();
        let ctx = self.engine.ctx();
        let rlk = self.engine.relin_key();
        let (d, o) = ctx.align_levels(data, op1)?;
        let leg_add = ctx.add(&d, &o)?;
        counter.count_nonscalar(crate::metrics::Phase::LtEq, 1);
        let leg_mult = ctx.he_mul(rlk, &d, &o)?;
        let leg_power = self.engine.pow_const(data, op2, counter)?;
        let main = main_start.elapsed();
        // Join and combine.
        let inds = branch.wait()?;
        counter.merge(&branch.counter);
        let helper = branch.elapsed().unwrap_or_default();
        let mut acc: Option<Ciphertext> = None;
        for (leg, ind) in [leg_add, leg_mult, leg_power].into_iter().zip(&inds) {
            let (l, i) = ctx.align_levels(&leg, ind)?;
            counter.count_nonscalar(crate::metrics::Phase::LtEq, 1);
            let sel = ctx.he_mul(rlk, &l, &i)?;
            acc = Some(match acc {
                None => sel,
                Some(a) => {
                    let (x, y) = ctx.align_levels(&a, &sel)?;
                    counter.count_add(crate::metrics::Phase::LtEq, 1);
                    ctx.add(&x, &y)?
                }
            });
        }
        Ok(QueryRun {
            result: acc.expect("three legs"),
            helper,
            main,
            total: t0.elapsed(),
        })
    }
}
