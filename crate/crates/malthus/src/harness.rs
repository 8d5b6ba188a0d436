//! Fixed-time closed-loop runner.
//!
//! Workers start together behind a barrier, loop until a shared stop flag is
//! raised, and hand back their operation counts, admission records and park
//! counts. A watchdog gives them a grace period to notice the flag before the
//! run is declared hung.

use std::cell::UnsafeCell;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Barrier};
use std::thread;
use std::time::{Duration, Instant};

use malthus_core::metrics::{AdmissionBuffer, AdmissionCounter, AdmissionHistory};
use malthus_core::node::ThreadCtx;
use malthus_core::rng::XorShift64;

use crate::error::BenchError;
use crate::platform;

/// Time allowed past the deadline for workers to wind down.
pub const GRACE: Duration = Duration::from_secs(10);

/// Per-thread admission record limit.
pub const DEFAULT_HISTORY_LIMIT: usize = 1 << 24;

// Salt separating workload streams from the lock's Bernoulli stream.
const WORKLOAD_SALT: u64 = 0x6a09_e667_f3bc_c908;

/// Data protected by a lock that lives outside it.
pub struct Guarded<T>(UnsafeCell<T>);

unsafe impl<T: Send> Sync for Guarded<T> {}

impl<T> Guarded<T> {
    pub fn new(v: T) -> Self {
        Self(UnsafeCell::new(v))
    }

    /// # Safety
    /// Caller holds the lock that protects this value, and no other
    /// reference obtained from it is live.
    #[allow(clippy::mut_from_ref)]
    pub unsafe fn get(&self) -> &mut T {
        unsafe { &mut *self.0.get() }
    }

    pub fn into_inner(self) -> T {
        self.0.into_inner()
    }
}

struct Shared {
    stop: AtomicBool,
    admissions: AdmissionCounter,
}

/// State handed to each worker body.
pub struct Worker {
    pub id: usize,
    pub ctx: ThreadCtx,
    /// Workload randomness, independent of lock behaviour.
    pub rng: XorShift64,
    pub ops: u64,
    admissions: AdmissionBuffer,
    shared: Arc<Shared>,
}

impl Worker {
    #[inline]
    pub fn running(&self) -> bool {
        !self.shared.stop.load(Ordering::Relaxed)
    }

    /// Record one admission to the measured lock. Call with it held.
    #[inline]
    pub fn admit(&mut self) -> u64 {
        self.admissions.record(&self.shared.admissions)
    }
}

pub struct LoopSpec {
    pub threads: usize,
    pub duration: Duration,
    pub seed: u64,
    pub history_limit: usize,
}

impl LoopSpec {
    pub fn new(threads: usize, duration: Duration, seed: u64) -> Self {
        Self { threads, duration, seed, history_limit: DEFAULT_HISTORY_LIMIT }
    }
}

#[derive(Debug, Clone)]
pub struct LoopOutput {
    pub per_thread_ops: Vec<u64>,
    pub history: AdmissionHistory,
    pub history_truncated: bool,
    pub parks: u64,
    pub elapsed: Duration,
}

impl LoopOutput {
    pub fn total_ops(&self) -> u64 {
        self.per_thread_ops.iter().sum()
    }
}

type Body = dyn Fn(&mut Worker) + Send + Sync;
type OnStop = Box<dyn FnOnce(&ThreadCtx) + Send>;

/// Run `body` on `threads` workers for `duration`.
///
/// `body` must return promptly once [`Worker::running`] is false. `on_stop`
/// runs on the coordinator right after the stop flag is raised, to wake
/// workers blocked on workload conditions; it gets a context whose id is
/// `threads`.
pub fn run_closed_loop(spec: &LoopSpec, body: Arc<Body>, on_stop: Option<OnStop>) -> Result<LoopOutput, BenchError> {
    if spec.threads == 0 {
        return Err(BenchError::Config("threads must be at least 1".into()));
    }
    let shared = Arc::new(Shared { stop: AtomicBool::new(false), admissions: AdmissionCounter::new() });
    let barrier = Arc::new(Barrier::new(spec.threads + 1));
    let (done_tx, done_rx) = mpsc::channel::<usize>();

    let mut handles = Vec::with_capacity(spec.threads);
    for id in 0..spec.threads {
        let mine = Arc::clone(&shared);
        let barrier = Arc::clone(&barrier);
        let body = Arc::clone(&body);
        let done = done_tx.clone();
        let (seed, limit) = (spec.seed, spec.history_limit);
        let h = thread::Builder::new()
            .name(format!("worker-{id}"))
            .spawn(move || {
                let mut w = Worker {
                    id,
                    ctx: platform::thread_ctx(id, seed),
                    rng: XorShift64::for_thread(seed ^ WORKLOAD_SALT, id as u64),
                    ops: 0,
                    admissions: AdmissionBuffer::with_capacity(id, limit),
                    shared: mine,
                };
                barrier.wait();
                body(&mut w);
                let _ = done.send(id);
                (w.ops, w.admissions, w.ctx.park_count())
            })
            .map_err(|e| BenchError::Runtime(format!("spawning worker {id}: {e}")))?;
        handles.push(h);
    }
    drop(done_tx);

    barrier.wait();
    let start = Instant::now();
    platform::sleep_until(start + spec.duration, || false);
    shared.stop.store(true, Ordering::SeqCst);
    let elapsed = start.elapsed();
    if let Some(f) = on_stop {
        let ctx = platform::thread_ctx(spec.threads, spec.seed);
        f(&ctx);
    }

    let deadline = Instant::now() + GRACE;
    let mut finished = 0;
    while finished < spec.threads {
        let left = deadline.saturating_duration_since(Instant::now());
        match done_rx.recv_timeout(left) {
            Ok(_) => finished += 1,
            Err(_) => {
                return Err(BenchError::Runtime(format!(
                    "watchdog: {} of {} workers still running {}s after the deadline",
                    spec.threads - finished,
                    spec.threads,
                    GRACE.as_secs()
                )))
            }
        }
    }

    let mut per_thread_ops = Vec::with_capacity(spec.threads);
    let mut buffers = Vec::with_capacity(spec.threads);
    let mut parks = 0;
    for h in handles {
        let (ops, buf, p) = h.join().map_err(|_| BenchError::Runtime("worker panicked".into()))?;
        per_thread_ops.push(ops);
        buffers.push(buf);
        parks += p;
    }
    let cutoff = shared.admissions.cutoff();
    let history = AdmissionHistory::merge(spec.threads, &buffers, cutoff)
        .map_err(|e| BenchError::Invariant(format!("admission history: {e}")))?;
    Ok(LoopOutput { per_thread_ops, history, history_truncated: cutoff.is_some(), parks, elapsed })
}
