//! The lock family.
//!
//! | name     | succession              | waiting                         |
//! |----------|-------------------------|---------------------------------|
//! | `tas`    | competitive (barging)   | global spin with backoff        |
//! | `mcs`    | direct handoff, FIFO    | local spin on the queue node    |
//! | `mcscr`  | direct handoff, CR      | as MCS, plus a passive list     |
//! | `lifocr` | direct handoff, LIFO    | local spin, stack of waiters    |
//! | `loiter` | outer barging + inner MCS | global spin, then inner queue |
//!
//! A lock is named by its kind plus an optional waiting-policy suffix:
//! none for unbounded spinning, `-s` for polite spinning, `-stp` for
//! spin-then-park and `-park` for immediate parking (`mcscr-stp`, `tas-s`).

use alloc::boxed::Box;
use alloc::string::ToString;
use core::fmt;
use core::str::FromStr;

use crate::node::{QueueNode, ThreadCtx};
use crate::park::WaitPolicy;
use crate::Error;

mod lifocr;
mod loiter;
mod mcs;
mod mcscr;
mod relax;
mod tas;

pub use lifocr::LifoCrLock;
pub use loiter::{LoiterConfig, LoiterLock};
pub use mcs::McsLock;
pub use mcscr::{CrStats, McsCrLock};
pub(crate) use relax::RelaxMutex;
pub use tas::{Backoff, TasLock};

/// Default fairness denominator: one graft per thousand releases on average.
pub const DEFAULT_FAIRNESS_DENOMINATOR: u64 = 1000;

/// Spin budget used when nothing better is known. Hosts normally replace it
/// with a calibrated value.
pub const DEFAULT_SPIN_BUDGET: u32 = 4096;

/// A mutual-exclusion lock driven by caller-owned queue nodes.
pub trait RawLock: Send + Sync {
    /// Block until the caller owns the lock. `node` must stay in place and
    /// unused by anything else until the matching `release` returns.
    fn acquire(&self, node: &QueueNode, ctx: &ThreadCtx);

    /// Release the lock.
    ///
    /// # Safety
    ///
    /// The caller must own the lock through `node`, acquired with `ctx`.
    unsafe fn release(&self, node: &QueueNode, ctx: &ThreadCtx);

    fn spec(&self) -> LockSpec;

    /// Culling statistics, for locks that keep a passive set.
    fn cr_stats(&self) -> Option<CrStats> {
        None
    }
}

impl dyn RawLock {
    /// Acquire and return a guard that releases on drop.
    pub fn lock<'a>(&'a self, node: &'a QueueNode, ctx: &'a ThreadCtx) -> LockGuard<'a, dyn RawLock> {
        self.acquire(node, ctx);
        LockGuard { lock: self, node, ctx }
    }
}

/// Releases the lock on drop.
pub struct LockGuard<'a, L: RawLock + ?Sized> {
    lock: &'a L,
    node: &'a QueueNode,
    ctx: &'a ThreadCtx,
}

impl<L: RawLock + ?Sized> Drop for LockGuard<'_, L> {
    fn drop(&mut self) {
        // SAFETY: constructed only after a successful acquire with this node.
        unsafe { self.lock.release(self.node, self.ctx) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LockKind {
    Tas,
    Mcs,
    McsCr,
    LifoCr,
    Loiter,
}

impl LockKind {
    pub const ALL: [LockKind; 5] = [LockKind::Tas, LockKind::Mcs, LockKind::McsCr, LockKind::LifoCr, LockKind::Loiter];

    pub fn as_str(&self) -> &'static str {
        match self {
            LockKind::Tas => "tas",
            LockKind::Mcs => "mcs",
            LockKind::McsCr => "mcscr",
            LockKind::LifoCr => "lifocr",
            LockKind::Loiter => "loiter",
        }
    }
}

/// Everything needed to build a lock: kind, waiting policy and tunables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LockSpec {
    pub kind: LockKind,
    pub policy: WaitPolicy,
    pub fairness_denominator: u64,
    pub backoff: Backoff,
    pub loiter: LoiterConfig,
}

impl LockSpec {
    pub fn new(kind: LockKind, policy: WaitPolicy) -> Self {
        Self {
            kind,
            policy,
            fairness_denominator: DEFAULT_FAIRNESS_DENOMINATOR,
            backoff: Backoff::default(),
            loiter: LoiterConfig::default(),
        }
    }

    /// Replace the budget of a spin-then-park policy; other policies are
    /// left alone.
    pub fn with_spin_budget(mut self, spin_budget: u32) -> Self {
        if let WaitPolicy::SpinThenPark { .. } = self.policy {
            self.policy = WaitPolicy::SpinThenPark { spin_budget };
        }
        self
    }

    pub fn with_fairness_denominator(mut self, d: u64) -> Self {
        self.fairness_denominator = d;
        self
    }

    pub fn with_loiter(mut self, loiter: LoiterConfig) -> Self {
        self.loiter = loiter;
        self
    }

    pub fn build(&self) -> Box<dyn RawLock> {
        match self.kind {
            LockKind::Tas => Box::new(TasLock::from_spec(*self)),
            LockKind::Mcs => Box::new(McsLock::from_spec(*self)),
            LockKind::McsCr => Box::new(McsCrLock::from_spec(*self)),
            LockKind::LifoCr => Box::new(LifoCrLock::from_spec(*self)),
            LockKind::Loiter => Box::new(LoiterLock::from_spec(*self)),
        }
    }
}

impl fmt::Display for LockSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let suffix = match self.policy {
            WaitPolicy::SpinUnbounded => "",
            WaitPolicy::SpinPolite => "-s",
            WaitPolicy::SpinThenPark { .. } => "-stp",
            WaitPolicy::ParkImmediate => "-park",
        };
        write!(f, "{}{}", self.kind.as_str(), suffix)
    }
}

impl FromStr for LockSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let (base, policy) = match s.split_once('-') {
            None => (s, WaitPolicy::SpinUnbounded),
            Some((base, "s")) => (base, WaitPolicy::SpinPolite),
            Some((base, "stp")) => (base, WaitPolicy::SpinThenPark { spin_budget: DEFAULT_SPIN_BUDGET }),
            Some((base, "park")) => (base, WaitPolicy::ParkImmediate),
            Some(_) => return Err(Error::UnknownLock(s.to_string())),
        };
        let kind = LockKind::ALL
            .into_iter()
            .find(|k| k.as_str() == base)
            .ok_or_else(|| Error::UnknownLock(s.to_string()))?;
        Ok(LockSpec::new(kind, policy))
    }
}
