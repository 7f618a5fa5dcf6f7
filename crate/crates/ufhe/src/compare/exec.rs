//! Job executors for batch comparison work.
//!
//! Jobs are boxed closures returning type-erased results. The pool
//! executor runs them on plain OS threads pulling from a shared FIFO
//! queue; results are returned in submission order regardless of which
//! worker ran what, and job panics surface as errors instead of
//! poisoning the process. Jobs must not use ambient randomness — all
//! entropy is split off deterministically before submission — so a run
//! with eight workers is bit-identical to a run with one.

use std::any::Any;
use std::collections::VecDeque;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc;
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::transform::TransformScratch;

/// Type-erased job output.
pub type JobOutput = Box<dyn Any + Send>;

/// A job: runs once with access to per-worker scratch buffers.
pub type JobFn = Box<dyn FnOnce(&mut WorkerScratch) -> JobOutput + Send + 'static>;

/// Per-worker reusable buffers. Allocated once per worker and handed to
/// every job that worker runs, so repeated jobs on one worker do not
/// reallocate.
pub struct WorkerScratch {
    /// Transform scratch (padded and full-length buffers).
    pub transform: TransformScratch,
    /// General-purpose word buffer.
    pub words: Vec<u64>,
}

impl WorkerScratch {
    pub fn new() -> Self {
        Self {
            transform: TransformScratch::new(),
            words: Vec::new(),
        }
    }
}

impl Default for WorkerScratch {
    fn default() -> Self {
        Self::new()
    }
}

/// Anything that can run a batch of jobs and return ordered results.
pub trait Executor: Send + Sync {
    /// Runs all jobs; `results[i]` is the output of `jobs[i]`.
    fn run(&self, jobs: Vec<JobFn>) -> Result<Vec<JobOutput>>;

    /// Number of workers actually used.
    fn workers(&self) -> usize;
}

/// Runs everything on the calling thread, in order.
pub struct SequentialExec;

impl Executor for SequentialExec {
    fn run(&self, jobs: Vec<JobFn>) -> Result<Vec<JobOutput>> {
        let mut scratch = WorkerScratch::new();
        let mut out = Vec::with_capacity(jobs.len());
        for (index, job) in jobs.into_iter().enumerate() {
            match catch_unwind(AssertUnwindSafe(|| job(&mut scratch))) {
                Ok(v) => out.push(v),
                Err(_) => return Err(Error::WorkerPanic { job_index: index }),
            }
        }
        Ok(out)
    }

    fn workers(&self) -> usize {
        1
    }
}

/// A fixed-size thread pool over a shared FIFO queue.
pub struct PoolExec {
    workers: usize,
}

impl PoolExec {
    /// A pool with `workers` threads (at least one).
    pub fn new(workers: usize) -> Self {
        Self {
            workers: workers.max(1),
        }
    }
}

enum JobOutcome {
    Done(JobOutput),
    Panicked,
}

impl Executor for PoolExec {
    fn run(&self, jobs: Vec<JobFn>) -> Result<Vec<JobOutput>> {
        let total = jobs.len();
        if total == 0 {
            return Ok(Vec::new());
        }
        let queue: Mutex<VecDeque<(usize, JobFn)>> =
            Mutex::new(jobs.into_iter().enumerate().collect());
        let (tx, rx) = mpsc::channel::<(usize, JobOutcome)>();
        let nworkers = self.workers.min(total);
        std::thread::scope(|scope| {
            for _ in 0..nworkers {
                let queue = &queue;
                let tx = tx.clone();
                scope.spawn(move || {
                    let mut scratch = WorkerScratch::new();
                    loop {
                        let next = queue.lock().expect("queue lock").pop_front();
                        let Some((index, job)) = next else { break };
                        let outcome = match catch_unwind(AssertUnwindSafe(|| job(&mut scratch))) {
                            Ok(v) => JobOutcome::Done(v),
                            Err(_) => JobOutcome::Panicked,
                        };
                        if tx.send((index, outcome)).is_err() {
                            break;
                        }
                    }
                });
            }
            drop(tx);
            let mut slots: Vec<Option<JobOutput>> = (0..total).map(|_| None).collect();
            let mut panicked: Option<usize> = None;
            for (index, outcome) in rx {
                match outcome {
                    JobOutcome::Done(v) => slots[index] = Some(v),
                    JobOutcome::Panicked => {
                        panicked = Some(panicked.map_or(index, |i: usize| i.min(index)));
                    }
                }
            }
            if let Some(job_index) = panicked {
                return Err(Error::WorkerPanic { job_index });
            }
            let mut out = Vec::with_capacity(total);
            for (i, slot) in slots.into_iter().enumerate() {
                match slot {
                    Some(v) => out.push(v),
                    None => return Err(Error::WorkerPanic { job_index: i }),
                }
            }
            Ok(out)
        })
    }

    fn workers(&self) -> usize {
        self.workers
    }
}
