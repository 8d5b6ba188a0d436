//! Benchmark configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use malthus_core::locks::{LockKind, LockSpec, LoiterConfig};
use malthus_core::metrics::DEFAULT_WINDOW;

use crate::error::BenchError;
use crate::harness::DEFAULT_HISTORY_LIMIT;
use crate::platform;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Benchmark {
    RandArray,
    RingWalker,
    DelayStress,
    ProducerConsumer,
    KeyMap,
    LruCache,
    BufferPool,
    BufferPoolSemaphore,
    Handover,
}

impl Benchmark {
    pub const ALL: [Benchmark; 9] = [
        Benchmark::RandArray,
        Benchmark::RingWalker,
        Benchmark::DelayStress,
        Benchmark::ProducerConsumer,
        Benchmark::KeyMap,
        Benchmark::LruCache,
        Benchmark::BufferPool,
        Benchmark::BufferPoolSemaphore,
        Benchmark::Handover,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Benchmark::RandArray => "randarray",
            Benchmark::RingWalker => "ringwalker",
            Benchmark::DelayStress => "delaystress",
            Benchmark::ProducerConsumer => "producer-consumer",
            Benchmark::KeyMap => "keymap",
            Benchmark::LruCache => "lrucache",
            Benchmark::BufferPool => "bufferpool",
            Benchmark::BufferPoolSemaphore => "bufferpool-sem",
            Benchmark::Handover => "handover",
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Benchmark {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        Benchmark::ALL.into_iter().find(|b| b.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = Benchmark::ALL.iter().map(|b| b.as_str()).collect();
            BenchError::Config(format!("unknown benchmark `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

/// Workload dimensions. [`WorkloadSizes::desk`] keeps runs small;
/// [`WorkloadSizes::paper`] uses the full-size arrays and key ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkloadSizes {
    /// Elements in each randarray array (shared and per-thread).
    pub array_elems: usize,
    /// Page-sized elements per ring.
    pub ring_elems: usize,
    /// Keymap key range.
    pub keymap_range: u64,
    /// LRU benchmark key range.
    pub lru_range: u64,
    pub lru_capacity: usize,
    /// Per-thread keyset length for keymap and lrucache.
    pub keyset: usize,
    pub pool_buffers: usize,
    /// 32-bit words per pool buffer.
    pub buffer_words: usize,
    pub queue_bound: usize,
    pub consumers: usize,
}

impl WorkloadSizes {
    pub fn desk() -> Self {
        Self {
            array_elems: 1 << 16,
            ring_elems: 50,
            keymap_range: 1 << 20,
            lru_range: 1_000_000,
            lru_capacity: 10_000,
            keyset: 1000,
            pool_buffers: 5,
            buffer_words: 1 << 14,
            queue_bound: 10_000,
            consumers: 3,
        }
    }

    pub fn paper() -> Self {
        Self { array_elems: 256 * 1024, keymap_range: 10_000_000, buffer_words: 1 << 18, ..Self::desk() }
    }
}

impl Default for WorkloadSizes {
    fn default() -> Self {
        Self::desk()
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub benchmark: Benchmark,
    pub lock: LockSpec,
    pub threads: usize,
    pub duration: Duration,
    pub runs: usize,
    pub seed: u64,
    pub window: usize,
    /// Condition-variable and semaphore append denominator; 1 is FIFO, 0
    /// never appends.
    pub cv_append_denom: u64,
    pub sizes: WorkloadSizes,
    pub history_limit: usize,
    pub csv: Option<PathBuf>,
    pub dump_history: Option<PathBuf>,
}

impl BenchConfig {
    /// Defaults: 2 s runs, 7 runs, LWSS window 1000, fairness denominator
    /// 1000, FIFO condition variables, desk-scale sizes. The spin-then-park
    /// budget comes from [`platform::spin_budget`].
    pub fn new(benchmark: Benchmark, lock: &str, threads: usize) -> Result<Self, BenchError> {
        let lock = lock.parse::<LockSpec>()?.with_spin_budget(platform::spin_budget());
        Ok(Self {
            benchmark,
            lock: tune_for_host(lock),
            threads,
            duration: Duration::from_secs(2),
            runs: 7,
            seed: platform::seed_from_env(1),
            window: DEFAULT_WINDOW,
            cv_append_denom: 1,
            sizes: WorkloadSizes::desk(),
            history_limit: DEFAULT_HISTORY_LIMIT,
            csv: None,
            dump_history: None,
        })
    }

    pub fn with_fairness_denominator(mut self, d: u64) -> Self {
        self.lock = self.lock.with_fairness_denominator(d);
        self
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.threads == 0 {
            return bad("threads must be at least 1");
        }
        if self.duration.is_zero() {
            return bad("duration must be positive");
        }
        if self.runs == 0 || self.runs.is_multiple_of(2) {
            return bad("runs must be odd so the median is a single run");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        let s = &self.sizes;
        if s.array_elems == 0 || s.ring_elems < 2 || s.keyset == 0 || s.lru_capacity == 0 {
            return bad("workload sizes must be positive (rings need at least 2 elements)");
        }
        if s.keymap_range == 0 || s.lru_range == 0 || s.keymap_range > u32::MAX as u64 {
            return bad("key ranges must be in 1..=2^32-1");
        }
        if s.pool_buffers == 0 || s.buffer_words == 0 || s.queue_bound == 0 || s.consumers == 0 {
            return bad("pool, buffer, queue and consumer sizes must be positive");
        }
        if self.benchmark == Benchmark::Handover && self.threads < 2 {
            return bad("handover needs at least 2 threads");
        }
        Ok(())
    }
}

/// Host-dependent lock tunables: LOITER admits at most one fast-path spinner
/// per processor.
pub fn tune_for_host(spec: LockSpec) -> LockSpec {
    if spec.kind == LockKind::Loiter {
        spec.with_loiter(LoiterConfig { max_spinners: platform::cpu_count(), ..spec.loiter })
    } else {
        spec
    }
}
