//! Test-and-set lock with randomized bounded exponential backoff.
//!
//! Succession is competitive: release marks the word free and whoever wins
//! the next exchange owns the lock, so arrivals routinely bypass waiters.
//! Under a parking policy, waiters that exhaust their spin budget mark the
//! word contended and sleep on an internal list; release then wakes one of
//! them to re-contend (heir presumptive), it does not hand over ownership.

use core::sync::atomic::{AtomicU8, Ordering};

use super::{LockKind, LockSpec, RawLock, RelaxMutex};
use crate::node::{NodeList, QueueNode, ThreadCtx};
use crate::park::{pause_hint, WaitPolicy};

const FREE: u8 = 0;
const HELD: u8 = 1;
const CONTENDED: u8 = 2;

/// Backoff window bounds in pause-loop iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Backoff {
    pub min: u32,
    pub max: u32,
}

impl Default for Backoff {
    fn default() -> Self {
        Self { min: 1, max: 1024 }
    }
}

pub struct TasLock {
    word: AtomicU8,
    sleepers: RelaxMutex<NodeList>,
    spec: LockSpec,
}

impl TasLock {
    pub fn new(policy: WaitPolicy) -> Self {
        Self::from_spec(LockSpec::new(LockKind::Tas, policy))
    }

    pub fn from_spec(spec: LockSpec) -> Self {
        Self { word: AtomicU8::new(FREE), sleepers: RelaxMutex::new(NodeList::new()), spec }
    }

    #[inline]
    fn try_grab(&self) -> bool {
        self.word.load(Ordering::Relaxed) == FREE
            && self.word.compare_exchange(FREE, HELD, Ordering::Acquire, Ordering::Relaxed).is_ok()
    }

    pub fn is_locked(&self) -> bool {
        self.word.load(Ordering::Relaxed) != FREE
    }

    fn delay(&self, ctx: &ThreadCtx, iterations: u64, step: &mut u32) {
        for _ in 0..iterations {
            match self.spec.policy {
                WaitPolicy::SpinPolite => ctx.parker().relax(*step),
                _ => pause_hint(),
            }
            *step = step.wrapping_add(1);
        }
    }

    fn acquire_parking(&self, node: &QueueNode, ctx: &ThreadCtx) {
        loop {
            if self.word.swap(CONTENDED, Ordering::Acquire) == FREE {
                return;
            }
            node.prepare(ctx);
            let queued = self.sleepers.with(ctx.parker(), |list| {
                if self.word.load(Ordering::Relaxed) == CONTENDED {
                    // SAFETY: we stay blocked below until popped and granted.
                    unsafe { list.push_back(node.as_ptr()) };
                    true
                } else {
                    false
                }
            });
            if queued {
                ctx.wait_for_grant(node, WaitPolicy::ParkImmediate);
            }
        }
    }
}

impl RawLock for TasLock {
    fn acquire(&self, node: &QueueNode, ctx: &ThreadCtx) {
        if self.try_grab() {
            return;
        }
        let budget = self.spec.policy.spin_budget();
        let mut window = self.spec.backoff.min.max(1) as u64;
        let mut step = 0u32;
        let mut spent = 0u64;
        loop {
            if let Some(budget) = budget {
                if spent >= budget as u64 {
                    return self.acquire_parking(node, ctx);
                }
            }
            let d = ctx.below(window) + 1;
            self.delay(ctx, d, &mut step);
            spent += d;
            window = (window * 2).min(self.spec.backoff.max.max(1) as u64);
            if self.try_grab() {
                return;
            }
        }
    }

    unsafe fn release(&self, _node: &QueueNode, ctx: &ThreadCtx) {
        if self.word.swap(FREE, Ordering::Release) == CONTENDED {
            if let Some(n) = self.sleepers.with(ctx.parker(), |list| list.pop_front()) {
                // SAFETY: the sleeper is blocked in acquire_parking.
                unsafe { QueueNode::grant(n) };
            }
        }
    }

    fn spec(&self) -> LockSpec {
        self.spec
    }
}
