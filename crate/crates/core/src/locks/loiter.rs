//! Outer-inner lock with throttling.
//!
//! Arrivals spin with randomized backoff on an outer test-and-set word (the
//! fast path). If that fails they queue on an inner MCS lock; the inner owner
//! is the single *standby* thread, which contends for the outer word with
//! spin-then-park waiting. Fast-path owners release competitively and wake
//! the standby as heir presumptive. A standby that loses too many rounds
//! becomes impatient and the next fast release hands it the outer lock
//! directly.
//!
//! Threads waiting on the inner lock form the passive set; the fast-path
//! circulators are the active set.

use core::sync::atomic::{AtomicBool, AtomicPtr, AtomicU8, AtomicUsize, Ordering};
use core::ptr;

use super::mcs::McsLock;
use super::{LockKind, LockSpec, RawLock};
use crate::node::{QueueNode, ThreadCtx};
use crate::park::{pause_hint, WaitPolicy};

const FREE: u8 = 0;
const HELD: u8 = 1;
const HANDOFF: u8 = 2;

/// Iterations a standby polls the outer word per round when its policy never
/// parks.
const STANDBY_SPIN_ROUND: u32 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoiterConfig {
    /// Concurrent fast-path spinners allowed.
    pub max_spinners: usize,
    /// Failed standby rounds before direct handoff is requested.
    pub impatience_threshold: u32,
    /// Fast-path backoff window bounds, in pause iterations.
    pub backoff_min: u32,
    pub backoff_max: u32,
    /// Total fast-path spin iterations before falling back to the inner lock.
    pub fast_spin_limit: u32,
    /// Lost outer CAS races tolerated before abandoning the fast path.
    pub abandon_after: u32,
    /// Pause iterations a fast releaser waits for someone else to take the
    /// lock before it wakes the standby. Zero disables the deferral.
    pub defer_wake_polls: u32,
}

impl Default for LoiterConfig {
    fn default() -> Self {
        Self {
            max_spinners: 4,
            impatience_threshold: 1000,
            backoff_min: 1,
            backoff_max: 1024,
            fast_spin_limit: 4096,
            abandon_after: 8,
            defer_wake_polls: 32,
        }
    }
}

pub struct LoiterLock {
    outer: AtomicU8,
    inner: McsLock,
    standby: AtomicPtr<QueueNode>,
    impatient: AtomicBool,
    spinners: AtomicUsize,
    // releasers currently holding a reference obtained from `standby`
    unparking: AtomicUsize,
    spec: LockSpec,
}

impl LoiterLock {
    pub fn new(policy: WaitPolicy) -> Self {
        Self::from_spec(LockSpec::new(LockKind::Loiter, policy))
    }

    pub fn from_spec(spec: LockSpec) -> Self {
        Self {
            outer: AtomicU8::new(FREE),
            inner: McsLock::from_spec(LockSpec { kind: LockKind::Mcs, ..spec }),
            standby: AtomicPtr::new(ptr::null_mut()),
            impatient: AtomicBool::new(false),
            spinners: AtomicUsize::new(0),
            unparking: AtomicUsize::new(0),
            spec,
        }
    }

    pub fn is_locked(&self) -> bool {
        self.outer.load(Ordering::Relaxed) != FREE
    }

    pub fn has_standby(&self) -> bool {
        !self.standby.load(Ordering::Relaxed).is_null()
    }

    #[inline]
    fn try_outer(&self) -> bool {
        self.outer.load(Ordering::Relaxed) == FREE
            && self.outer.compare_exchange(FREE, HELD, Ordering::SeqCst, Ordering::Relaxed).is_ok()
    }

    fn spin_step(&self, ctx: &ThreadCtx, step: &mut u32) {
        match self.spec.policy {
            WaitPolicy::SpinPolite => ctx.parker().relax(*step),
            _ => pause_hint(),
        }
        *step = step.wrapping_add(1);
    }

    fn fast_path(&self, ctx: &ThreadCtx) -> bool {
        let cfg = &self.spec.loiter;
        let mut window = cfg.backoff_min.max(1) as u64;
        let mut spent = 0u64;
        let mut lost = 0u32;
        let mut step = 0u32;
        loop {
            if self.outer.load(Ordering::Relaxed) == FREE {
                if self.outer.compare_exchange(FREE, HELD, Ordering::SeqCst, Ordering::Relaxed).is_ok() {
                    return true;
                }
                lost += 1;
                if lost >= cfg.abandon_after {
                    return false;
                }
            }
            if spent >= cfg.fast_spin_limit as u64 {
                return false;
            }
            let d = ctx.below(window) + 1;
            for _ in 0..d {
                self.spin_step(ctx, &mut step);
            }
            spent += d;
            window = (window * 2).min(cfg.backoff_max.max(1) as u64);
        }
    }

    /// Standby contention for the outer word.
    fn standby_wait(&self, node: &QueueNode, ctx: &ThreadCtx) {
        self.standby.store(node.as_ptr(), Ordering::SeqCst);
        let mut failed = 0u32;
        let mut step = 0u32;
        loop {
            match self.outer.load(Ordering::SeqCst) {
                HANDOFF => {
                    self.outer.store(HELD, Ordering::Relaxed);
                    break;
                }
                FREE if self.outer.compare_exchange(FREE, HELD, Ordering::SeqCst, Ordering::Relaxed).is_ok() => break,
                _ => {}
            }
            failed += 1;
            if failed >= self.spec.loiter.impatience_threshold {
                self.impatient.store(true, Ordering::SeqCst);
            }
            match self.spec.policy.spin_budget() {
                Some(budget) => {
                    let mut polled = 0;
                    while polled < budget && self.outer.load(Ordering::Relaxed) == HELD {
                        pause_hint();
                        polled += 1;
                    }
                    if polled >= budget {
                        ctx.parker().park();
                    }
                }
                None => {
                    for _ in 0..STANDBY_SPIN_ROUND {
                        if self.outer.load(Ordering::Relaxed) != HELD {
                            break;
                        }
                        self.spin_step(ctx, &mut step);
                    }
                }
            }
        }
        self.impatient.store(false, Ordering::SeqCst);
        self.standby.store(ptr::null_mut(), Ordering::SeqCst);
        // a releaser may still be reading our parker through `standby`
        let mut i = 0u32;
        while self.unparking.load(Ordering::SeqCst) != 0 {
            ctx.parker().relax(i);
            i = i.wrapping_add(1);
        }
    }

    /// Pin the standby's parker, if there is a standby.
    fn standby_parker(&self) -> Option<alloc::sync::Arc<dyn crate::park::Parker>> {
        self.unparking.fetch_add(1, Ordering::SeqCst);
        let s = self.standby.load(Ordering::SeqCst);
        // SAFETY: a standby clears `standby` and then waits for `unparking`
        // to drain before its node or context can go away.
        let p = if s.is_null() { None } else { unsafe { QueueNode::pin_parker(s) } };
        self.unparking.fetch_sub(1, Ordering::SeqCst);
        p
    }
}

impl RawLock for LoiterLock {
    fn acquire(&self, node: &QueueNode, ctx: &ThreadCtx) {
        node.slow.set(false);
        if self.try_outer() {
            return;
        }
        let admitted = self.spinners.fetch_add(1, Ordering::Relaxed) < self.spec.loiter.max_spinners;
        let won = admitted && self.fast_path(ctx);
        self.spinners.fetch_sub(1, Ordering::Relaxed);
        if won {
            return;
        }
        self.inner.acquire(node, ctx);
        node.slow.set(true);
        self.standby_wait(node, ctx);
    }

    unsafe fn release(&self, node: &QueueNode, ctx: &ThreadCtx) {
        if node.slow.get() {
            self.outer.store(FREE, Ordering::SeqCst);
            // the next inner waiter becomes the standby
            unsafe { self.inner.release(node, ctx) };
            return;
        }

        if self.impatient.load(Ordering::SeqCst) {
            if let Some(p) = self.standby_parker() {
                self.outer.store(HANDOFF, Ordering::SeqCst);
                p.unpark();
                return;
            }
        }

        self.outer.store(FREE, Ordering::SeqCst);
        for _ in 0..self.spec.loiter.defer_wake_polls {
            if self.outer.load(Ordering::Relaxed) != FREE {
                // the new owner inherits the duty to wake the standby
                return;
            }
            pause_hint();
        }
        if let Some(p) = self.standby_parker() {
            p.unpark();
        }
    }

    fn spec(&self) -> LockSpec {
        self.spec
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locks::tests::ctx;

    #[test]
    fn uncontended_uses_fast_path_only() {
        let lock = LoiterLock::new(WaitPolicy::SpinPolite);
        let c = ctx(0);
        let n = QueueNode::new();
        lock.acquire(&n, &c);
        assert!(lock.is_locked());
        assert!(!n.slow.get());
        assert!(!lock.inner.is_locked());
        unsafe { lock.release(&n, &c) };
        assert!(!lock.is_locked());
        assert!(!lock.has_standby());
    }
}
