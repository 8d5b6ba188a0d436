use core::cell::UnsafeCell;
use core::sync::atomic::{AtomicBool, Ordering};

use crate::park::Parker;

/// Short internal test-and-test-and-set lock for constant-time bookkeeping
/// (wait queues, parking lists). Waiters spin through [`Parker::relax`].
pub(crate) struct RelaxMutex<T> {
    held: AtomicBool,
    value: UnsafeCell<T>,
}

unsafe impl<T: Send> Send for RelaxMutex<T> {}
unsafe impl<T: Send> Sync for RelaxMutex<T> {}

impl<T> RelaxMutex<T> {
    pub(crate) const fn new(value: T) -> Self {
        Self { held: AtomicBool::new(false), value: UnsafeCell::new(value) }
    }

    pub(crate) fn with<R>(&self, parker: &dyn Parker, f: impl FnOnce(&mut T) -> R) -> R {
        let mut i = 0u32;
        loop {
            if !self.held.load(Ordering::Relaxed)
                && self
                    .held
                    .compare_exchange_weak(false, true, Ordering::Acquire, Ordering::Relaxed)
                    .is_ok()
            {
                break;
            }
            parker.relax(i);
            i = i.wrapping_add(1);
        }
        // SAFETY: exclusive access while `held` is ours.
        let r = f(unsafe { &mut *self.value.get() });
        self.held.store(false, Ordering::Release);
        r
    }
}
