//! OS-backed parking, spin-budget calibration and environment overrides.

use std::sync::atomic::{AtomicU8, Ordering};
use std::sync::{Arc, OnceLock};
use std::thread::{self, Thread};
use std::time::{Duration, Instant};

use malthus_core::node::ThreadCtx;
use malthus_core::park::{pause_hint, Parker};

/// Overrides the calibrated spin-then-park budget (pause iterations).
pub const SPIN_BUDGET_ENV: &str = "MALTHUS_SPIN_BUDGET";
/// Overrides the base PRNG seed.
pub const SEED_ENV: &str = "MALTHUS_SEED";

const EMPTY: u8 = 0;
const NOTIFIED: u8 = 1;

/// A [`Parker`] bound to one OS thread.
///
/// The permit lives in an atomic next to the thread handle, so a wake that
/// lands before the owner parks is never lost, and `std::thread::park`'s own
/// token only serves to interrupt the sleep.
#[derive(Debug)]
pub struct ThreadParker {
    permit: AtomicU8,
    thread: Thread,
    yield_every: u32,
}

impl ThreadParker {
    /// A parker owned by the calling thread.
    pub fn current() -> Self {
        Self { permit: AtomicU8::new(EMPTY), thread: thread::current(), yield_every: yield_interval() }
    }

    pub fn permit(&self) -> u8 {
        self.permit.load(Ordering::Acquire)
    }
}

impl Parker for ThreadParker {
    fn park(&self) {
        if self.permit.swap(EMPTY, Ordering::Acquire) == NOTIFIED {
            return;
        }
        loop {
            thread::park();
            if self.permit.swap(EMPTY, Ordering::Acquire) == NOTIFIED {
                return;
            }
        }
    }

    fn unpark(&self) {
        if self.permit.swap(NOTIFIED, Ordering::Release) == EMPTY {
            self.thread.unpark();
        }
    }

    #[inline]
    fn relax(&self, iteration: u32) {
        if iteration % self.yield_every == self.yield_every - 1 {
            thread::yield_now();
        } else {
            pause_hint();
        }
    }
}

/// Context for the calling thread with a fresh [`ThreadParker`].
pub fn thread_ctx(id: usize, seed: u64) -> ThreadCtx {
    ThreadCtx::new(id, Arc::new(ThreadParker::current()), seed)
}

/// Processors available to this process.
pub fn cpu_count() -> usize {
    static CPUS: OnceLock<usize> = OnceLock::new();
    *CPUS.get_or_init(|| thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Polite-spin steps between yields. With one processor a spinner can never
/// observe progress without giving the CPU away, so it yields every step.
fn yield_interval() -> u32 {
    static EVERY: OnceLock<u32> = OnceLock::new();
    *EVERY.get_or_init(|| if cpu_count() == 1 { 1 } else { 64 })
}

fn env_u64(name: &str) -> Option<u64> {
    std::env::var(name).ok()?.trim().parse().ok()
}

/// Seed from the environment, or `fallback`.
pub fn seed_from_env(fallback: u64) -> u64 {
    env_u64(SEED_ENV).unwrap_or(fallback)
}

/// Spin budget for spin-then-park waiting: the environment override if set,
/// otherwise a one-time calibration.
pub fn spin_budget() -> u32 {
    static BUDGET: OnceLock<u32> = OnceLock::new();
    *BUDGET.get_or_init(|| match env_u64(SPIN_BUDGET_ENV) {
        Some(b) => b.min(u32::MAX as u64) as u32,
        None => calibrate_spin_budget(),
    })
}

/// Median nanoseconds for one park/unpark round trip between two threads.
pub fn park_round_trip_ns(rounds: usize) -> u64 {
    let a = Arc::new(ThreadParker::current());
    let slot: Arc<OnceLock<Arc<ThreadParker>>> = Arc::new(OnceLock::new());
    let peer_slot = Arc::clone(&slot);
    let a_peer = Arc::clone(&a);
    let peer = thread::spawn(move || {
        let b = Arc::new(ThreadParker::current());
        let _ = peer_slot.set(Arc::clone(&b));
        a_peer.unpark();
        for _ in 0..rounds {
            b.park();
            a_peer.unpark();
        }
    });
    a.park();
    let b = Arc::clone(slot.get().expect("peer registered before first unpark"));
    let mut samples = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let t0 = Instant::now();
        b.unpark();
        a.park();
        samples.push(t0.elapsed().as_nanos() as u64);
    }
    peer.join().expect("calibration peer");
    samples.sort_unstable();
    samples[samples.len() / 2]
}

/// Nanoseconds per pause-hint iteration.
pub fn pause_ns() -> f64 {
    let n = 200_000u32;
    let t0 = Instant::now();
    for _ in 0..n {
        pause_hint();
    }
    (t0.elapsed().as_nanos() as f64 / n as f64).max(0.01)
}

/// Spin just long enough to cover one park/unpark round trip: spinning
/// longer than that costs more than parking would.
pub fn calibrate_spin_budget() -> u32 {
    let rt = park_round_trip_ns(200) as f64;
    let per = pause_ns();
    ((rt / per) as u64).clamp(64, 1 << 20) as u32
}

/// Sleep in short slices until `deadline` or until `stop` returns true.
pub fn sleep_until(deadline: Instant, mut stop: impl FnMut() -> bool) {
    loop {
        let now = Instant::now();
        if now >= deadline || stop() {
            return;
        }
        thread::sleep((deadline - now).min(Duration::from_millis(20)));
    }
}
