//! Waiting policies and the park/unpark contract.
//!
//! A [`Parker`] is a one-permit channel owned by a single thread. `unpark`
//! deposits the permit (saturating at one) and `park` consumes it, blocking
//! while none is pending. `park` may also return spuriously, so every caller
//! re-checks its own condition in a loop.

use core::sync::atomic::{AtomicBool, AtomicU8, Ordering};

/// Per-thread suspend/resume channel.
pub trait Parker: Send + Sync {
    /// Consume a pending permit, blocking until one arrives. Only the owning
    /// thread may call this.
    fn park(&self);

    /// Make a permit available and wake the owner if it is parked. Callable
    /// from any thread; idempotent while a permit is pending.
    fn unpark(&self);

    /// One step of a polite spin loop. `iteration` counts steps within the
    /// current episode so an implementation can cede the processor
    /// periodically.
    #[inline]
    fn relax(&self, _iteration: u32) {
        pause_hint();
    }
}

/// Polite-spin hint for the current processor. No semantic effect.
#[inline(always)]
pub fn pause_hint() {
    core::hint::spin_loop();
}

/// How a waiter passes the time until its grant flag is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaitPolicy {
    /// Busy-wait with a pause hint each iteration, forever.
    SpinUnbounded,
    /// Busy-wait through [`Parker::relax`], which may also yield the CPU.
    SpinPolite,
    /// Park at once.
    ParkImmediate,
    /// Poll for `spin_budget` iterations, then park.
    SpinThenPark { spin_budget: u32 },
}

impl WaitPolicy {
    pub fn spin_budget(&self) -> Option<u32> {
        match self {
            WaitPolicy::SpinThenPark { spin_budget } => Some(*spin_budget),
            WaitPolicy::ParkImmediate => Some(0),
            _ => None,
        }
    }

    pub fn may_park(&self) -> bool {
        matches!(self, WaitPolicy::ParkImmediate | WaitPolicy::SpinThenPark { .. })
    }
}

/// Whether a waiter ever had to park before its grant arrived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaitOutcome {
    GrantedSpinning,
    GrantedParked,
}

/// Wait until `grant` reads true under `policy`.
///
/// The granting thread must store `true` with release ordering and then
/// call `unpark` on `parker`. Never returns while `grant` is false.
pub fn wait_until(parker: &dyn Parker, policy: WaitPolicy, grant: &AtomicBool) -> WaitOutcome {
    if grant.load(Ordering::Acquire) {
        return WaitOutcome::GrantedSpinning;
    }
    match policy {
        WaitPolicy::SpinUnbounded => {
            while !grant.load(Ordering::Acquire) {
                pause_hint();
            }
            WaitOutcome::GrantedSpinning
        }
        WaitPolicy::SpinPolite => {
            let mut i: u32 = 0;
            while !grant.load(Ordering::Acquire) {
                parker.relax(i);
                i = i.wrapping_add(1);
            }
            WaitOutcome::GrantedSpinning
        }
        WaitPolicy::ParkImmediate => park_loop(parker, grant),
        WaitPolicy::SpinThenPark { spin_budget } => {
            for _ in 0..spin_budget {
                if grant.load(Ordering::Acquire) {
                    return WaitOutcome::GrantedSpinning;
                }
                pause_hint();
            }
            park_loop(parker, grant)
        }
    }
}

fn park_loop(parker: &dyn Parker, grant: &AtomicBool) -> WaitOutcome {
    loop {
        if grant.load(Ordering::Acquire) {
            return WaitOutcome::GrantedParked;
        }
        parker.park();
    }
}

const EMPTY: u8 = 0;
const NOTIFIED: u8 = 1;

/// A parker that never leaves the CPU: `park` spins until the permit is
/// present. Usable without an operating system and in single-threaded tests.
#[derive(Debug, Default)]
pub struct SpinParker {
    permit: AtomicU8,
}

impl SpinParker {
    pub const fn new() -> Self {
        Self { permit: AtomicU8::new(EMPTY) }
    }

    pub fn permit(&self) -> u8 {
        self.permit.load(Ordering::Acquire)
    }
}

impl Parker for SpinParker {
    fn park(&self) {
        while self
            .permit
            .compare_exchange_weak(NOTIFIED, EMPTY, Ordering::Acquire, Ordering::Relaxed)
            .is_err()
        {
            pause_hint();
        }
    }

    fn unpark(&self) {
        self.permit.store(NOTIFIED, Ordering::Release);
    }
}
