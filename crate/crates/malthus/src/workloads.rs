//! Benchmark bodies.
//!
//! Each `run_*` function performs one fixed-time run and returns the raw
//! loop output plus workload-specific measurements. Operation counts are
//! outer-loop iterations per thread unless noted.

use std::collections::{HashMap, VecDeque};
use std::hint::black_box;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use malthus_core::coordination::{CondVar, CrMutex, CrSemaphore};
use malthus_core::locks::RawLock;
use malthus_core::metrics::{AdmissionBuffer, AdmissionCounter, AdmissionHistory};
use malthus_core::node::{QueueNode, ThreadCtx};
use malthus_core::rng::XorShift64;
use malthus_core::softlru::{DisplacementStats, Lookup, SoftLruCache};

use crate::config::{BenchConfig, Benchmark};
use crate::error::BenchError;
use crate::harness::{run_closed_loop, Guarded, LoopOutput, LoopSpec, Worker};

pub const RANDARRAY_CS_FETCHES: usize = 100;
pub const RANDARRAY_NCS_FETCHES: usize = 400;
pub const RING_NCS_STEPS: usize = 50;
pub const RING_CS_STEPS: usize = 10;
pub const DELAY_CS: u32 = 200;
pub const DELAY_NCS: u32 = 5000;
pub const KEYMAP_NCS_STEPS: usize = 1000;
/// Keymap reuse probability is 9/10.
pub const KEYMAP_REPLACE: (u64, u64) = (1, 10);
/// LRU benchmark reuse probability is 99/100.
pub const LRU_REPLACE: (u64, u64) = (1, 100);
pub const POOL_EXCHANGE: usize = 500;
pub const POOL_PRIVATE_UPDATES: usize = 5000;
/// Grant-history window for the buffer pool.
pub const GRANT_WINDOW: usize = 100;

const PAGE_WORDS: usize = 4096 / 8;

/// Measurements beyond throughput and lock admissions.
#[derive(Debug, Clone, Default)]
pub struct Aux {
    pub locks_per_message: Option<f64>,
    pub messages: Option<u64>,
    pub lru: Option<DisplacementStats>,
    pub handover_ns: Option<u64>,
    pub handover_samples: Option<usize>,
    /// Buffer-pool grants, one record per buffer handed out.
    pub grants: Option<AdmissionHistory>,
    /// Buffer-pool takes that had to wait.
    pub pool_waits: Option<u64>,
    /// Producer-consumer condition waits by producers and by consumers.
    pub cv_waits: Option<(u64, u64)>,
    /// Keymap critical sections that reused a stored key, and the total.
    pub key_reuse: Option<(u64, u64)>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub run: LoopOutput,
    pub aux: Aux,
}

fn loop_spec(cfg: &BenchConfig, threads: usize) -> LoopSpec {
    LoopSpec { threads, duration: cfg.duration, seed: cfg.seed, history_limit: cfg.history_limit }
}

fn shared_lock(cfg: &BenchConfig) -> Arc<dyn RawLock> {
    cfg.lock.build().into()
}

/// Run one instance of the configured benchmark.
pub fn run_once(cfg: &BenchConfig) -> Result<RunOutput, BenchError> {
    cfg.validate()?;
    match cfg.benchmark {
        Benchmark::RandArray => run_randarray(cfg),
        Benchmark::RingWalker => run_ringwalker(cfg),
        Benchmark::DelayStress => run_delaystress(cfg),
        Benchmark::ProducerConsumer => run_producer_consumer(cfg),
        Benchmark::KeyMap => run_keymap(cfg),
        Benchmark::LruCache => run_lrucache(cfg),
        Benchmark::BufferPool => run_bufferpool(cfg, PoolMode::CondVar),
        Benchmark::BufferPoolSemaphore => run_bufferpool(cfg, PoolMode::Semaphore),
        Benchmark::Handover => measure_handover(cfg),
    }
}

fn plain(run: LoopOutput) -> RunOutput {
    RunOutput { run, aux: Aux::default() }
}

fn random_words(rng: &mut XorShift64, n: usize) -> Vec<u32> {
    (0..n).map(|_| rng.next_u64() as u32).collect()
}

/// Sum `fetches` random loads from `a`.
#[inline]
fn random_fetches(a: &[u32], rng: &mut XorShift64, fetches: usize) -> u64 {
    let n = a.len() as u64;
    let mut acc = 0u64;
    for _ in 0..fetches {
        acc = acc.wrapping_add(a[rng.below(n) as usize] as u64);
    }
    acc
}

/// Shared-array random reads in the critical section, private-array random
/// reads outside it.
pub fn run_randarray(cfg: &BenchConfig) -> Result<RunOutput, BenchError> {
    let mut init = XorShift64::new(cfg.seed);
    let shared: Arc<Vec<u32>> = Arc::new(random_words(&mut init, cfg.sizes.array_elems));
    let lock = shared_lock(cfg);
    let elems = cfg.sizes.array_elems;
    let body = move |w: &mut Worker| {
        let private = random_words(&mut w.rng, elems);
        let node = QueueNode::new();
        let mut sink = 0u64;
        while w.running() {
            lock.acquire(&node, &w.ctx);
            w.admit();
            sink = sink.wrapping_add(random_fetches(&shared, &mut w.rng, RANDARRAY_CS_FETCHES));
            unsafe { lock.release(&node, &w.ctx) };
            sink = sink.wrapping_add(random_fetches(&private, &mut w.rng, RANDARRAY_NCS_FETCHES));
            w.ops += 1;
        }
        black_box(sink);
    };
    Ok(plain(run_closed_loop(&loop_spec(cfg, cfg.threads), Arc::new(body), None)?))
}

/// A ring of page-sized elements. Each element stores the word index of the
/// next element's link at a random word offset within its own page.
pub struct Ring {
    words: Vec<u64>,
    pos: usize,
}

impl Ring {
    pub fn new(elems: usize, rng: &mut XorShift64) -> Self {
        let mut order: Vec<usize> = (0..elems).collect();
        for i in (1..elems).rev() {
            order.swap(i, rng.below(i as u64 + 1) as usize);
        }
        let slot: Vec<usize> = (0..elems).map(|e| e * PAGE_WORDS + rng.below(PAGE_WORDS as u64) as usize).collect();
        let mut words = vec![0u64; elems * PAGE_WORDS];
        for i in 0..elems {
            let (from, to) = (order[i], order[(i + 1) % elems]);
            words[slot[from]] = slot[to] as u64;
        }
        Self { words, pos: slot[order[0]] }
    }

    /// Follow `steps` links; returns the final position.
    #[inline]
    pub fn advance(&mut self, steps: usize) -> usize {
        let mut p = self.pos;
        for _ in 0..steps {
            p = self.words[p] as usize;
        }
        self.pos = p;
        p
    }

    pub fn position(&self) -> usize {
        self.pos
    }
}

/// Private ring walks outside the critical section, a shared ring walk
/// inside it. Positions persist across iterations.
pub fn run_ringwalker(cfg: &BenchConfig) -> Result<RunOutput, BenchError> {
    let mut init = XorShift64::new(cfg.seed);
    let shared = Arc::new(Guarded::new(Ring::new(cfg.sizes.ring_elems, &mut init)));
    let lock = shared_lock(cfg);
    let elems = cfg.sizes.ring_elems;
    let body = move |w: &mut Worker| {
        let mut private = Ring::new(elems, &mut w.rng);
        let node = QueueNode::new();
        let mut sink = 0usize;
        while w.running() {
            lock.acquire(&node, &w.ctx);
            w.admit();
            // SAFETY: lock held.
            sink ^= unsafe { shared.get() }.advance(RING_CS_STEPS);
            unsafe { lock.release(&node, &w.ctx) };
            sink ^= private.advance(RING_NCS_STEPS);
            w.ops += 1;
        }
        black_box(sink);
    };
    Ok(plain(run_closed_loop(&loop_spec(cfg, cfg.threads), Arc::new(body), None)?))
}

/// Data-dependent integer recurrence the optimizer cannot collapse.
#[inline(never)]
pub fn delay(iterations: u32, seed: u64) -> u64 {
    let mut x = black_box(seed) | 1;
    for _ in 0..iterations {
        x = x.wrapping_mul(0x5851_f42d_4c95_7f2d).wrapping_add(x >> 17);
    }
    black_box(x)
}

/// Pure delay loops: CS of 200 iterations, NCS of 5000.
pub fn run_delaystress(cfg: &BenchConfig) -> Result<RunOutput, BenchError> {
    let lock = shared_lock(cfg);
    let body = move |w: &mut Worker| {
        let node = QueueNode::new();
        let mut x = w.id as u64;
        while w.running() {
            lock.acquire(&node, &w.ctx);
            w.admit();
            x = delay(DELAY_CS, x);
            unsafe { lock.release(&node, &w.ctx) };
            x = delay(DELAY_NCS, x);
            w.ops += 1;
        }
        black_box(x);
    };
    Ok(plain(run_closed_loop(&loop_spec(cfg, cfg.threads), Arc::new(body), None)?))
}

struct BoundedQueue {
    mutex: CrMutex,
    not_empty: CondVar,
    not_full: CondVar,
    items: Guarded<VecDeque<u64>>,
    bound: usize,
    produced: AtomicU64,
    consumed: AtomicU64,
    producer_waits: AtomicU64,
    consumer_waits: AtomicU64,
}

/// Wake everyone blocked on `cvs` after the stop flag is up. The stop flag
/// is re-checked under `mutex` before every wait, so nobody can start
/// waiting after this critical section.
fn wake_all(mutex: &CrMutex, cvs: &[&CondVar], ctx: &ThreadCtx) {
    let node = QueueNode::new();
    mutex.acquire(&node, ctx);
    for cv in cvs {
        cv.broadcast(ctx);
    }
    unsafe { mutex.release(&node, ctx) };
}

/// `threads` producers and a fixed set of consumers over a bounded queue
/// built from one lock and two condition variables. Per-thread ops are
/// messages produced (producers) or consumed (consumers).
pub fn run_producer_consumer(cfg: &BenchConfig) -> Result<RunOutput, BenchError> {
    let producers = cfg.threads;
    let policy = cfg.lock.policy;
    let q = Arc::new(BoundedQueue {
        mutex: CrMutex::new(cfg.lock),
        not_empty: CondVar::new(cfg.cv_append_denom, policy),
        not_full: CondVar::new(cfg.cv_append_denom, policy),
        items: Guarded::new(VecDeque::with_capacity(cfg.sizes.queue_bound)),
        bound: cfg.sizes.queue_bound,
        produced: AtomicU64::new(0),
        consumed: AtomicU64::new(0),
        producer_waits: AtomicU64::new(0),
        consumer_waits: AtomicU64::new(0),
    });
    let qb = Arc::clone(&q);
    let body = move |w: &mut Worker| {
        let q = &*qb;
        let node = QueueNode::new();
        let producer = w.id < producers;
        while w.running() {
            q.mutex.acquire(&node, &w.ctx);
            w.admit();
            loop {
                // SAFETY: mutex held; the reference is dropped before any wait.
                let len = unsafe { q.items.get() }.len();
                if !w.running() {
                    unsafe { q.mutex.release(&node, &w.ctx) };
                    return;
                }
                if producer && len < q.bound {
                    unsafe { q.items.get() }.push_back(w.ops);
                    q.not_empty.signal(&w.ctx);
                    break;
                }
                if !producer && len > 0 {
                    unsafe { q.items.get() }.pop_front();
                    q.not_full.signal(&w.ctx);
                    break;
                }
                let (cv, waits) = if producer { (&q.not_full, &q.producer_waits) } else { (&q.not_empty, &q.consumer_waits) };
                waits.fetch_add(1, Ordering::Relaxed);
                cv.wait(&q.mutex, &node, &w.ctx).expect("mutex held");
            }
            let counter = if producer { &q.produced } else { &q.consumed };
            counter.fetch_add(1, Ordering::Relaxed);
            unsafe { q.mutex.release(&node, &w.ctx) };
            w.ops += 1;
        }
    };
    let qs = Arc::clone(&q);
    let stop = Box::new(move |ctx: &ThreadCtx| wake_all(&qs.mutex, &[&qs.not_empty, &qs.not_full], ctx));
    let run = run_closed_loop(&loop_spec(cfg, producers + cfg.sizes.consumers), Arc::new(body), Some(stop))?;

    let produced = q.produced.load(Ordering::Relaxed);
    let consumed = q.consumed.load(Ordering::Relaxed);
    // SAFETY: all workers have finished.
    let left = unsafe { q.items.get() }.len() as u64;
    if produced != consumed + left {
        return Err(BenchError::Invariant(format!(
            "producer-consumer: produced {produced} != consumed {consumed} + queued {left}"
        )));
    }
    let acquisitions = q.mutex.acquisitions();
    let aux = Aux {
        locks_per_message: (consumed > 0).then(|| acquisitions as f64 / consumed as f64),
        messages: Some(consumed),
        cv_waits: Some((q.producer_waits.load(Ordering::Relaxed), q.consumer_waits.load(Ordering::Relaxed))),
        ..Aux::default()
    };
    Ok(RunOutput { run, aux })
}

/// Per-thread keyset; in the critical section a random slot either reuses
/// its key or draws a fresh one.
struct KeySet {
    keys: Vec<u64>,
    range: u64,
}

impl KeySet {
    fn new(len: usize, range: u64, rng: &mut XorShift64) -> Self {
        Self { keys: (0..len).map(|_| rng.below(range)).collect(), range }
    }

    /// Returns the key and whether it was reused.
    #[inline]
    fn pick(&mut self, rng: &mut XorShift64, replace: (u64, u64)) -> (u64, bool) {
        let i = rng.below(self.keys.len() as u64) as usize;
        if rng.chance(replace.0, replace.1) {
            self.keys[i] = rng.below(self.range);
            (self.keys[i], false)
        } else {
            (self.keys[i], true)
        }
    }
}

#[inline]
fn spin_rng(rng: &mut XorShift64, steps: usize) {
    for _ in 0..steps {
        black_box(rng.next_u64());
    }
}

/// Shared map updates keyed by a mostly-stable per-thread keyset.
pub fn run_keymap(cfg: &BenchConfig) -> Result<RunOutput, BenchError> {
    let range = cfg.sizes.keymap_range;
    let map: HashMap<u32, u64> = (0..range as u32).map(|k| (k, 0)).collect();
    let map = Arc::new(Guarded::new(map));
    let lock = shared_lock(cfg);
    let (reused, total) = (Arc::new(AtomicU64::new(0)), Arc::new(AtomicU64::new(0)));
    let (r2, t2, m2) = (Arc::clone(&reused), Arc::clone(&total), Arc::clone(&map));
    let keyset_len = cfg.sizes.keyset;
    let body = move |w: &mut Worker| {
        let mut keys = KeySet::new(keyset_len, range, &mut w.rng);
        let node = QueueNode::new();
        let (mut mine_reused, mut mine_total) = (0u64, 0u64);
        while w.running() {
            lock.acquire(&node, &w.ctx);
            w.admit();
            let (k, reuse) = keys.pick(&mut w.rng, KEYMAP_REPLACE);
            // SAFETY: lock held.
            *unsafe { m2.get() }.get_mut(&(k as u32)).expect("prefilled") += 1;
            unsafe { lock.release(&node, &w.ctx) };
            mine_reused += reuse as u64;
            mine_total += 1;
            spin_rng(&mut w.rng, KEYMAP_NCS_STEPS);
            w.ops += 1;
        }
        r2.fetch_add(mine_reused, Ordering::Relaxed);
        t2.fetch_add(mine_total, Ordering::Relaxed);
    };
    let run = run_closed_loop(&loop_spec(cfg, cfg.threads), Arc::new(body), None)?;
    // SAFETY: workers finished.
    let len = unsafe { map.get() }.len() as u64;
    if len != range {
        return Err(BenchError::Invariant(format!("keymap size changed: {len} != {range}")));
    }
    let aux = Aux { key_reuse: Some((reused.load(Ordering::Relaxed), total.load(Ordering::Relaxed))), ..Aux::default() };
    Ok(RunOutput { run, aux })
}

/// Shared software LRU cache probed with a mostly-stable per-thread keyset.
pub fn run_lrucache(cfg: &BenchConfig) -> Result<RunOutput, BenchError> {
    let cache = Arc::new(Guarded::new(SoftLruCache::new(cfg.sizes.lru_capacity)));
    let lock = shared_lock(cfg);
    let c2 = Arc::clone(&cache);
    let (keyset_len, range) = (cfg.sizes.keyset, cfg.sizes.lru_range);
    let body = move |w: &mut Worker| {
        let mut keys = KeySet::new(keyset_len, range, &mut w.rng);
        let node = QueueNode::new();
        let mut hits = 0u64;
        while w.running() {
            lock.acquire(&node, &w.ctx);
            w.admit();
            let (k, _) = keys.pick(&mut w.rng, LRU_REPLACE);
            // SAFETY: lock held.
            hits += (unsafe { c2.get() }.lookup_or_install(k, w.id) == Lookup::Hit) as u64;
            unsafe { lock.release(&node, &w.ctx) };
            spin_rng(&mut w.rng, KEYMAP_NCS_STEPS);
            w.ops += 1;
        }
        black_box(hits);
    };
    let run = run_closed_loop(&loop_spec(cfg, cfg.threads), Arc::new(body), None)?;
    // SAFETY: workers finished.
    let stats = unsafe { cache.get() }.displacement_stats();
    Ok(RunOutput { run, aux: Aux { lru: Some(stats), ..Aux::default() } })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMode {
    CondVar,
    Semaphore,
}

struct Pool {
    mutex: CrMutex,
    not_empty: CondVar,
    units: Option<CrSemaphore>,
    buffers: Guarded<VecDeque<Vec<u32>>>,
    grants: AdmissionCounter,
    outstanding: AtomicUsize,
    capacity: usize,
    overdrawn: AtomicBool,
    waits: AtomicU64,
}

impl Pool {
    fn note_take(&self) {
        if self.outstanding.fetch_add(1, Ordering::Relaxed) + 1 > self.capacity {
            self.overdrawn.store(true, Ordering::Relaxed);
        }
    }
}

/// Workers borrow one of a few shared buffers, swap random slots with a
/// private buffer, return it, then scribble on their private buffer. With
/// [`PoolMode::Semaphore`] a CR semaphore counts available buffers instead
/// of the condition variable.
pub fn run_bufferpool(cfg: &BenchConfig, mode: PoolMode) -> Result<RunOutput, BenchError> {
    let words = cfg.sizes.buffer_words;
    let n = cfg.sizes.pool_buffers;
    let mut init = XorShift64::new(cfg.seed);
    let pool = Arc::new(Pool {
        mutex: CrMutex::new(cfg.lock),
        not_empty: CondVar::new(cfg.cv_append_denom, cfg.lock.policy),
        units: (mode == PoolMode::Semaphore).then(|| CrSemaphore::new(n as u64, cfg.cv_append_denom, cfg.lock.policy)),
        buffers: Guarded::new((0..n).map(|_| random_words(&mut init, words)).collect()),
        grants: AdmissionCounter::new(),
        outstanding: AtomicUsize::new(0),
        capacity: n,
        overdrawn: AtomicBool::new(false),
        waits: AtomicU64::new(0),
    });
    let grant_log: Arc<Mutex<Vec<AdmissionBuffer>>> = Arc::new(Mutex::new(Vec::new()));
    let (p2, log2) = (Arc::clone(&pool), Arc::clone(&grant_log));
    let limit = cfg.history_limit;
    let body = move |w: &mut Worker| {
        let p = &*p2;
        let mut private = random_words(&mut w.rng, words);
        let mut grants = AdmissionBuffer::with_capacity(w.id, limit);
        let node = QueueNode::new();
        while w.running() {
            if let Some(units) = &p.units {
                units.wait(&w.ctx);
            }
            p.mutex.acquire(&node, &w.ctx);
            w.admit();
            let mut waited = false;
            let buf = loop {
                // SAFETY: mutex held; no reference survives the wait.
                if let Some(b) = unsafe { p.buffers.get() }.pop_front() {
                    break Some(b);
                }
                if !w.running() || p.units.is_some() {
                    break None;
                }
                waited = true;
                p.not_empty.wait(&p.mutex, &node, &w.ctx).expect("mutex held");
            };
            let Some(mut buf) = buf else {
                unsafe { p.mutex.release(&node, &w.ctx) };
                if let Some(units) = &p.units {
                    units.post(&w.ctx);
                }
                break;
            };
            grants.record(&p.grants);
            p.note_take();
            unsafe { p.mutex.release(&node, &w.ctx) };
            if waited {
                p.waits.fetch_add(1, Ordering::Relaxed);
            }

            for _ in 0..POOL_EXCHANGE {
                let i = w.rng.below(words as u64) as usize;
                let j = w.rng.below(words as u64) as usize;
                std::mem::swap(&mut buf[i], &mut private[j]);
            }

            p.mutex.acquire(&node, &w.ctx);
            p.outstanding.fetch_sub(1, Ordering::Relaxed);
            unsafe { p.buffers.get() }.push_back(buf);
            if p.units.is_none() {
                p.not_empty.signal(&w.ctx);
            }
            unsafe { p.mutex.release(&node, &w.ctx) };
            if let Some(units) = &p.units {
                units.post(&w.ctx);
            }

            for _ in 0..POOL_PRIVATE_UPDATES {
                let i = w.rng.below(words as u64) as usize;
                private[i] = private[i].wrapping_add(1);
            }
            w.ops += 1;
        }
        black_box(&private);
        log2.lock().expect("grant log").push(grants);
    };
    let ps = Arc::clone(&pool);
    let stop = Box::new(move |ctx: &ThreadCtx| wake_all(&ps.mutex, &[&ps.not_empty], ctx));
    let run = run_closed_loop(&loop_spec(cfg, cfg.threads), Arc::new(body), Some(stop))?;

    if pool.overdrawn.load(Ordering::Relaxed) {
        return Err(BenchError::Invariant(format!("buffer pool: more than {n} buffers outstanding")));
    }
    // SAFETY: workers finished.
    let home = unsafe { pool.buffers.get() }.len();
    if home != n {
        return Err(BenchError::Invariant(format!("buffer pool: {home} of {n} buffers returned")));
    }
    let logs = std::mem::take(&mut *grant_log.lock().expect("grant log"));
    let grants = AdmissionHistory::merge(cfg.threads, &logs, pool.grants.cutoff())
        .map_err(|e| BenchError::Invariant(format!("grant history: {e}")))?;
    let aux = Aux { grants: Some(grants), pool_waits: Some(pool.waits.load(Ordering::Relaxed)), ..Aux::default() };
    Ok(RunOutput { run, aux })
}

struct HandoverState {
    // nanoseconds since `epoch` at the last release, and who released
    released_at: AtomicU64,
    releaser: AtomicUsize,
    epoch: Instant,
    samples: Mutex<Vec<u64>>,
}

const NOBODY: usize = usize::MAX;

/// Time from one owner's release call to a different thread's return from
/// acquire, sampled on every change of ownership. Reports the median.
pub fn measure_handover(cfg: &BenchConfig) -> Result<RunOutput, BenchError> {
    if cfg.threads < 2 {
        return Err(BenchError::Config("handover needs at least 2 threads".into()));
    }
    let st = Arc::new(HandoverState {
        released_at: AtomicU64::new(0),
        releaser: AtomicUsize::new(NOBODY),
        epoch: Instant::now(),
        samples: Mutex::new(Vec::new()),
    });
    let lock = shared_lock(cfg);
    let s2 = Arc::clone(&st);
    let body = move |w: &mut Worker| {
        let node = QueueNode::new();
        let mut mine = Vec::new();
        let mut x = w.id as u64;
        while w.running() {
            lock.acquire(&node, &w.ctx);
            let now = s2.epoch.elapsed().as_nanos() as u64;
            w.admit();
            // the lock orders these relaxed accesses
            let prev = s2.releaser.load(Ordering::Relaxed);
            if prev != NOBODY && prev != w.id {
                mine.push(now.saturating_sub(s2.released_at.load(Ordering::Relaxed)));
            }
            x = delay(DELAY_CS, x);
            s2.releaser.store(w.id, Ordering::Relaxed);
            s2.released_at.store(s2.epoch.elapsed().as_nanos() as u64, Ordering::Relaxed);
            unsafe { lock.release(&node, &w.ctx) };
            x = delay(DELAY_CS, x);
            w.ops += 1;
        }
        black_box(x);
        s2.samples.lock().expect("samples").extend(mine);
    };
    let run = run_closed_loop(&loop_spec(cfg, cfg.threads), Arc::new(body), None)?;
    let mut samples = std::mem::take(&mut *st.samples.lock().expect("samples"));
    if samples.is_empty() {
        return Err(BenchError::Runtime("handover: no ownership changes observed".into()));
    }
    let n = samples.len();
    let median = malthus_core::metrics::median(&mut samples).expect("non-empty") as u64;
    Ok(RunOutput { run, aux: Aux { handover_ns: Some(median), handover_samples: Some(n), ..Aux::default() } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    fn cfg(b: Benchmark, lock: &str, threads: usize, ms: u64) -> BenchConfig {
        let mut c = BenchConfig::new(b, lock, threads).unwrap();
        c.duration = Duration::from_millis(ms);
        c.runs = 1;
        c.sizes.array_elems = 1 << 10;
        c.sizes.buffer_words = 1 << 10;
        c.sizes.keymap_range = 1 << 12;
        c
    }

    #[test]
    fn ring_visits_every_element_once_per_lap() {
        let mut r = XorShift64::new(3);
        let mut ring = Ring::new(50, &mut r);
        let start = ring.position();
        let mut seen = std::collections::HashSet::new();
        for _ in 0..50 {
            assert!(seen.insert(ring.advance(1) / PAGE_WORDS));
        }
        assert_eq!(ring.position(), start);
    }

    #[test]
    fn delay_depends_on_input() {
        assert_ne!(delay(10, 1), delay(10, 2));
        assert_eq!(delay(0, 4), 5);
    }

    #[test]
    fn keyset_reuse_rate() {
        let mut r = XorShift64::new(8);
        let mut ks = KeySet::new(1000, 1 << 20, &mut r);
        let reused = (0..100_000).filter(|_| ks.pick(&mut r, KEYMAP_REPLACE).1).count() as f64;
        // binomial sd at p=0.9, n=1e5 is ~95
        assert!((reused - 90_000.0).abs() < 6.0 * 95.0, "{reused}");
    }

    #[test]
    fn single_thread_workloads_complete() {
        for b in [Benchmark::RandArray, Benchmark::RingWalker, Benchmark::DelayStress, Benchmark::KeyMap, Benchmark::LruCache] {
            let out = run_once(&cfg(b, "mcscr-stp", 1, 50)).unwrap();
            assert!(out.run.total_ops() > 0, "{b}");
        }
    }

    #[test]
    fn lru_single_thread_never_displaces_others() {
        let out = run_once(&cfg(Benchmark::LruCache, "mcs-s", 1, 100)).unwrap();
        let s = out.aux.lru.unwrap();
        assert_eq!(s.other_evictions, 0);
        assert!((0.0..=1.0).contains(&s.miss_rate()));
    }

    #[test]
    fn producer_consumer_conserves_messages() {
        let out = run_once(&cfg(Benchmark::ProducerConsumer, "mcs-stp", 1, 200)).unwrap();
        assert!(out.aux.messages.unwrap() > 0);
        assert!(out.aux.locks_per_message.unwrap() >= 1.0);
    }

    #[test]
    fn pool_with_enough_buffers_never_waits() {
        for b in [Benchmark::BufferPool, Benchmark::BufferPoolSemaphore] {
            let out = run_once(&cfg(b, "mcs-stp", 5, 100)).unwrap();
            if b == Benchmark::BufferPool {
                assert_eq!(out.aux.pool_waits, Some(0));
            }
            let g = out.aux.grants.unwrap();
            assert_eq!(g.len() as u64, out.run.total_ops());
        }
    }

    #[test]
    fn contended_pool_terminates() {
        for b in [Benchmark::BufferPool, Benchmark::BufferPoolSemaphore] {
            let mut c = cfg(b, "mcs-stp", 8, 150);
            c.cv_append_denom = 0;
            let out = run_once(&c).unwrap();
            assert!(out.run.total_ops() > 0);
        }
    }

    #[test]
    fn handover_samples_are_collected() {
        let out = run_once(&cfg(Benchmark::Handover, "mcs-s", 2, 100)).unwrap();
        assert!(out.aux.handover_samples.unwrap() > 0);
        let c = cfg(Benchmark::Handover, "mcs-s", 1, 10);
        assert_eq!(measure_handover(&c).unwrap_err().exit_code(), 1);
    }
}
