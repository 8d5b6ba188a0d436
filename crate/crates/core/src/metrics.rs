//! Admission histories and the fairness metrics computed from them.
//!
//! The lock owner stamps each admission with a global ordinal drawn from an
//! [`AdmissionCounter`] and appends it to its own [`AdmissionBuffer`]. After
//! the run the buffers are merged into an [`AdmissionHistory`] ordered by
//! ordinal, from which short-term fairness (average LWSS, MTTR) and
//! long-term fairness (Gini, RSTDDEV) are derived.

use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::Error;

/// Default LWSS window, in admissions.
pub const DEFAULT_WINDOW: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AdmissionRecord {
    pub ordinal: u64,
    pub thread_id: usize,
}

/// Global admission sequence. Only the lock owner touches it, so a relaxed
/// load/store pair is enough; the lock orders consecutive owners.
#[derive(Debug)]
pub struct AdmissionCounter {
    next: AtomicU64,
    cutoff: AtomicU64,
}

impl Default for AdmissionCounter {
    fn default() -> Self {
        Self::new()
    }
}

impl AdmissionCounter {
    pub const fn new() -> Self {
        Self { next: AtomicU64::new(0), cutoff: AtomicU64::new(u64::MAX) }
    }

    /// Admissions stamped so far.
    pub fn issued(&self) -> u64 {
        self.next.load(Ordering::Relaxed)
    }

    /// True once some buffer ran out of space.
    pub fn is_disabled(&self) -> bool {
        self.cutoff.load(Ordering::Relaxed) != u64::MAX
    }

    /// First ordinal that was not recorded, if recording stopped early.
    pub fn cutoff(&self) -> Option<u64> {
        let c = self.cutoff.load(Ordering::Relaxed);
        (c != u64::MAX).then_some(c)
    }
}

/// Per-thread record buffer with a hard size limit. Storage grows on demand.
#[derive(Debug, Clone)]
pub struct AdmissionBuffer {
    thread_id: usize,
    ordinals: Vec<u64>,
    capacity: usize,
}

impl AdmissionBuffer {
    pub fn with_capacity(thread_id: usize, capacity: usize) -> Self {
        Self { thread_id, ordinals: Vec::with_capacity(capacity.min(1 << 12)), capacity }
    }

    pub fn thread_id(&self) -> usize {
        self.thread_id
    }

    pub fn len(&self) -> usize {
        self.ordinals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordinals.is_empty()
    }

    /// Stamp one admission. Must be called while holding the lock being
    /// measured. Once any buffer fills, recording stops for everyone but
    /// ordinals keep being issued.
    pub fn record(&mut self, counter: &AdmissionCounter) -> u64 {
        let ordinal = counter.next.load(Ordering::Relaxed);
        counter.next.store(ordinal + 1, Ordering::Relaxed);
        if ordinal < counter.cutoff.load(Ordering::Relaxed) {
            if self.ordinals.len() < self.capacity {
                self.ordinals.push(ordinal);
            } else {
                counter.cutoff.store(ordinal, Ordering::Relaxed);
            }
        }
        ordinal
    }

    /// Build from already-stamped ordinals.
    pub fn from_ordinals(thread_id: usize, ordinals: Vec<u64>) -> Self {
        let capacity = ordinals.len();
        Self { thread_id, ordinals, capacity }
    }
}

/// Admissions ordered by ordinal.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AdmissionHistory {
    records: Vec<AdmissionRecord>,
    thread_count: usize,
}

impl AdmissionHistory {
    /// Build from a thread-id sequence; position `i` gets ordinal `i`.
    pub fn from_sequence(thread_count: usize, ids: &[usize]) -> Result<Self, Error> {
        let records = ids
            .iter()
            .enumerate()
            .map(|(i, &t)| AdmissionRecord { ordinal: i as u64, thread_id: t })
            .collect();
        Self::from_records(thread_count, records)
    }

    /// Validate and adopt records that are already in ordinal order.
    pub fn from_records(thread_count: usize, records: Vec<AdmissionRecord>) -> Result<Self, Error> {
        for (i, r) in records.iter().enumerate() {
            if r.thread_id >= thread_count {
                return Err(Error::ThreadOutOfRange { thread_id: r.thread_id, thread_count });
            }
            if r.ordinal != i as u64 {
                if i > 0 && r.ordinal == records[i - 1].ordinal {
                    return Err(Error::DuplicateOrdinal(r.ordinal));
                }
                return Err(Error::OrdinalGap { expected: i as u64, found: r.ordinal });
            }
        }
        Ok(Self { records, thread_count })
    }

    /// Merge per-thread buffers. Records at or beyond `cutoff` are dropped so
    /// that a truncated recording still yields a contiguous prefix.
    pub fn merge(thread_count: usize, buffers: &[AdmissionBuffer], cutoff: Option<u64>) -> Result<Self, Error> {
        let limit = cutoff.unwrap_or(u64::MAX);
        let mut records: Vec<AdmissionRecord> = buffers
            .iter()
            .flat_map(|b| {
                b.ordinals
                    .iter()
                    .filter(move |&&o| o < limit)
                    .map(move |&o| AdmissionRecord { ordinal: o, thread_id: b.thread_id })
            })
            .collect();
        records.sort_unstable();
        for w in records.windows(2) {
            if w[0].ordinal == w[1].ordinal {
                return Err(Error::DuplicateOrdinal(w[0].ordinal));
            }
        }
        Self::from_records(thread_count, records)
    }

    pub fn records(&self) -> &[AdmissionRecord] {
        &self.records
    }

    pub fn thread_count(&self) -> usize {
        self.thread_count
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn thread_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.records.iter().map(|r| r.thread_id)
    }

    /// The history with its first `n` admissions removed, renumbered from 0.
    pub fn without_prefix(&self, n: usize) -> AdmissionHistory {
        let n = n.min(self.records.len());
        let records = self.records[n..]
            .iter()
            .enumerate()
            .map(|(i, r)| AdmissionRecord { ordinal: i as u64, thread_id: r.thread_id })
            .collect();
        Self { records, thread_count: self.thread_count }
    }

    pub fn per_thread_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.thread_count];
        for r in &self.records {
            counts[r.thread_id] += 1;
        }
        counts
    }
}

fn distinct_in(ids: &[usize], stamp: &mut [usize], mark: usize) -> usize {
    let mut n = 0;
    for &t in ids {
        if stamp[t] != mark {
            stamp[t] = mark;
            n += 1;
        }
    }
    n
}

/// Distinct-thread count of each complete `window`-sized block. A history
/// shorter than one window is treated as a single window.
pub fn window_lwss(history: &AdmissionHistory, window: usize) -> Result<Vec<usize>, Error> {
    if window == 0 {
        return Err(Error::ZeroWindow);
    }
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let ids: Vec<usize> = history.thread_ids().collect();
    let mut stamp = vec![usize::MAX; history.thread_count];
    if ids.len() < window {
        return Ok(vec![distinct_in(&ids, &mut stamp, 0)]);
    }
    Ok(ids.chunks_exact(window).enumerate().map(|(i, c)| distinct_in(c, &mut stamp, i)).collect())
}

/// Mean lock working set size over disjoint abutting windows.
pub fn avg_lwss(history: &AdmissionHistory, window: usize) -> Result<f64, Error> {
    let w = window_lwss(history, window)?;
    Ok(w.iter().sum::<usize>() as f64 / w.len() as f64)
}

/// Time-to-reacquire samples: for each admission with an earlier admission
/// by the same thread, the number of admissions strictly between the two.
pub fn ttr_samples(history: &AdmissionHistory) -> Vec<u64> {
    let mut last = vec![u64::MAX; history.thread_count];
    let mut out = Vec::new();
    for r in history.records() {
        let prev = last[r.thread_id];
        if prev != u64::MAX {
            out.push(r.ordinal - prev - 1);
        }
        last[r.thread_id] = r.ordinal;
    }
    out
}

/// Per thread, the longest run of consecutive admissions that excludes it,
/// counting the runs before its first and after its last admission. A thread
/// appears in every window of `w` consecutive admissions iff its entry is
/// below `w`.
pub fn longest_absence(history: &AdmissionHistory) -> Vec<u64> {
    let n = history.len() as u64;
    let mut next = vec![0u64; history.thread_count];
    let mut worst = vec![0u64; history.thread_count];
    for r in history.records() {
        let t = r.thread_id;
        worst[t] = worst[t].max(r.ordinal - next[t]);
        next[t] = r.ordinal + 1;
    }
    for t in 0..history.thread_count {
        worst[t] = worst[t].max(n - next[t]);
    }
    worst
}

/// Median of a sample set; an even count averages the two middle values.
pub fn median(samples: &mut [u64]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    samples.sort_unstable();
    let n = samples.len();
    Some(if n % 2 == 1 {
        samples[n / 2] as f64
    } else {
        (samples[n / 2 - 1] as f64 + samples[n / 2] as f64) / 2.0
    })
}

/// Median time to reacquire.
pub fn mttr(history: &AdmissionHistory) -> Result<f64, Error> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    median(&mut ttr_samples(history)).ok_or(Error::NoReacquisition)
}

/// Gini coefficient of per-thread counts; 0 is perfectly even.
pub fn gini(counts: &[u64]) -> f64 {
    let n = counts.len();
    let total: u128 = counts.iter().map(|&x| x as u128).sum();
    if n <= 1 || total == 0 {
        return 0.0;
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    // sum over ordered pairs of |xi - xj| = 2 * sum_i (2i - n + 1) x_(i)
    let mut acc: i128 = 0;
    for (i, &x) in sorted.iter().enumerate() {
        acc += (2 * i as i128 - n as i128 + 1) * x as i128;
    }
    (2 * acc) as f64 / (2 * n as u128 * total) as f64
}

/// Population standard deviation over mean.
pub fn rstddev(counts: &[u64]) -> Result<f64, Error> {
    let n = counts.len() as u128;
    let sum: u128 = counts.iter().map(|&x| x as u128).sum();
    if sum == 0 {
        return Err(Error::ZeroMean);
    }
    let sum_sq: u128 = counts.iter().map(|&x| (x as u128) * (x as u128)).sum();
    // sigma / mu = sqrt(n * sum_sq - sum^2) / sum
    let spread = n * sum_sq - sum * sum;
    Ok(libm::sqrt(spread as f64) / sum as f64)
}

/// Threads needed to keep the critical section continuously occupied:
/// `floor((ncs + cs) / cs)`.
pub fn saturation_threads(ncs_cost: u64, cs_cost: u64) -> Result<u64, Error> {
    if cs_cost == 0 {
        return Err(Error::ZeroCriticalSection);
    }
    Ok((ncs_cost + cs_cost) / cs_cost)
}

/// Fairness summary for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessReport {
    pub avg_lwss: f64,
    pub mttr: Option<f64>,
    pub gini: f64,
    pub rstddev: Option<f64>,
    pub per_thread_counts: Vec<u64>,
}

impl FairnessReport {
    /// Short-term metrics come from `history`; long-term ones from `counts`
    /// (completed operations per thread over the whole run).
    pub fn compute(history: &AdmissionHistory, window: usize, counts: Vec<u64>) -> Result<Self, Error> {
        let avg_lwss = avg_lwss(history, window)?;
        let mttr = match mttr(history) {
            Ok(m) => Some(m),
            Err(Error::NoReacquisition) => None,
            Err(e) => return Err(e),
        };
        Ok(Self { avg_lwss, mttr, gini: gini(&counts), rstddev: rstddev(&counts).ok(), per_thread_counts: counts })
    }

    pub fn from_history(history: &AdmissionHistory, window: usize) -> Result<Self, Error> {
        Self::compute(history, window, history.per_thread_counts())
    }
}
