//! MCS with concurrency restriction.
//!
//! Acquire is plain MCS. Release inspects the chain and, in order of
//! precedence:
//!
//! 1. with probability `1/D`, grafts the eldest passive node in right behind
//!    the owner and hands it the lock (long-term fairness);
//! 2. if some node sits strictly between the owner and the tail, moves the
//!    one nearest the owner to the head of the passive list and grants its
//!    successor (culling);
//! 3. if the owner is alone on the chain, moves the most recently passivated
//!    node back to the chain and grants it (work conservation);
//! 4. otherwise releases like MCS.
//!
//! The passive list is only touched by the lock owner, so it needs no atomics
//! of its own.

use core::cell::UnsafeCell;
use core::ptr;
use core::sync::atomic::{AtomicPtr, AtomicU64, AtomicUsize, Ordering};

use super::mcs::{await_next, enqueue_and_wait, release_plain};
use super::{LockKind, LockSpec, RawLock};
use crate::node::{NodeList, QueueNode, ThreadCtx};
use crate::park::WaitPolicy;

/// Counters describing passive-set traffic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CrStats {
    pub culled: u64,
    pub reprovisioned: u64,
    pub grafted: u64,
    pub passive_len: usize,
}

pub struct McsCrLock {
    tail: AtomicPtr<QueueNode>,
    passive: UnsafeCell<NodeList>,
    culled: AtomicU64,
    reprovisioned: AtomicU64,
    grafted: AtomicU64,
    passive_len: AtomicUsize,
    fairness: AtomicU64,
    spec: LockSpec,
}

// The passive list is guarded by lock ownership.
unsafe impl Sync for McsCrLock {}
unsafe impl Send for McsCrLock {}

impl McsCrLock {
    pub fn new(policy: WaitPolicy) -> Self {
        Self::from_spec(LockSpec::new(LockKind::McsCr, policy))
    }

    pub fn from_spec(spec: LockSpec) -> Self {
        Self {
            tail: AtomicPtr::new(ptr::null_mut()),
            passive: UnsafeCell::new(NodeList::new()),
            culled: AtomicU64::new(0),
            reprovisioned: AtomicU64::new(0),
            grafted: AtomicU64::new(0),
            passive_len: AtomicUsize::new(0),
            fairness: AtomicU64::new(spec.fairness_denominator),
            spec,
        }
    }

    pub fn stats(&self) -> CrStats {
        CrStats {
            culled: self.culled.load(Ordering::Relaxed),
            reprovisioned: self.reprovisioned.load(Ordering::Relaxed),
            grafted: self.grafted.load(Ordering::Relaxed),
            passive_len: self.passive_len.load(Ordering::Relaxed),
        }
    }

    /// Change the fairness denominator; zero disables grafting.
    pub fn set_fairness_denominator(&self, d: u64) {
        self.fairness.store(d, Ordering::Relaxed);
    }

    pub fn is_locked(&self) -> bool {
        !self.tail.load(Ordering::Relaxed).is_null()
    }

    fn bump(counter: &AtomicU64) {
        counter.store(counter.load(Ordering::Relaxed) + 1, Ordering::Relaxed);
    }

    /// Swing the tail from `owner` to `n` and hand `n` the lock. Returns
    /// false, with `n` not granted, when an arrival already moved the tail.
    unsafe fn install_as_tail(&self, owner: &QueueNode, n: *mut QueueNode) -> bool {
        unsafe { (*n).next.store(ptr::null_mut(), Ordering::Relaxed) };
        if self
            .tail
            .compare_exchange(owner.as_ptr(), n, Ordering::AcqRel, Ordering::Relaxed)
            .is_ok()
        {
            unsafe { QueueNode::grant(n) };
            true
        } else {
            false
        }
    }
}

impl RawLock for McsCrLock {
    fn acquire(&self, node: &QueueNode, ctx: &ThreadCtx) {
        enqueue_and_wait(&self.tail, node, ctx, self.spec.policy);
    }

    unsafe fn release(&self, node: &QueueNode, ctx: &ThreadCtx) {
        // SAFETY: we own the lock, which protects the passive list.
        let passive = unsafe { &mut *self.passive.get() };
        let mut succ = node.next.load(Ordering::Acquire);

        if !passive.is_empty() && ctx.bernoulli(self.fairness.load(Ordering::Relaxed)) {
            let eldest = passive.pop_back().expect("non-empty");
            self.passive_len.store(passive.len(), Ordering::Relaxed);
            Self::bump(&self.grafted);
            if succ.is_null() {
                if unsafe { self.install_as_tail(node, eldest) } {
                    return;
                }
                succ = await_next(node, ctx);
            }
            unsafe {
                (*eldest).next.store(succ, Ordering::Relaxed);
                QueueNode::grant(eldest);
            }
            return;
        }

        if !succ.is_null() {
            if self.tail.load(Ordering::Acquire) != succ {
                // succ is surplus: someone is queued behind it
                // SAFETY: succ and its successor are blocked waiters.
                let after = unsafe { await_next(&*succ, ctx) };
                unsafe { passive.push_front(succ) };
                self.passive_len.store(passive.len(), Ordering::Relaxed);
                Self::bump(&self.culled);
                unsafe { QueueNode::grant(after) };
                return;
            }
            unsafe { QueueNode::grant(succ) };
            return;
        }

        if let Some(recent) = passive.pop_front() {
            if unsafe { self.install_as_tail(node, recent) } {
                self.passive_len.store(passive.len(), Ordering::Relaxed);
                Self::bump(&self.reprovisioned);
                return;
            }
            // an arrival is linking behind us; keep the node passive
            unsafe { passive.push_front(recent) };
        }

        unsafe { release_plain(&self.tail, node, ctx) }
    }

    fn spec(&self) -> LockSpec {
        self.spec.with_fairness_denominator(self.fairness.load(Ordering::Relaxed))
    }

    fn cr_stats(&self) -> Option<CrStats> {
        Some(self.stats())
    }
}
