use std::cell::UnsafeCell;
use std::sync::atomic::{AtomicU8, Ordering};
use std::sync::Arc;
use std::thread::{self, Thread};

use malthus_core::node::ThreadCtx;
use malthus_core::park::Parker;

/// Minimal OS parker: a one-permit flag over std park/unpark.
pub struct OsParker {
    permit: AtomicU8,
    owner: Thread,
}

impl Parker for OsParker {
    fn park(&self) {
        while self.permit.swap(0, Ordering::Acquire) == 0 {
            thread::park();
        }
    }

    fn unpark(&self) {
        if self.permit.swap(1, Ordering::Release) == 0 {
            self.owner.unpark();
        }
    }

    fn relax(&self, _iteration: u32) {
        thread::yield_now();
    }
}

pub fn os_ctx(id: usize) -> ThreadCtx {
    let p = OsParker { permit: AtomicU8::new(0), owner: thread::current() };
    ThreadCtx::new(id, Arc::new(p), 0x1234 + id as u64)
}

/// Data guarded by a lock the test holds.
pub struct Shared<T>(UnsafeCell<T>);

unsafe impl<T: Send> Sync for Shared<T> {}

impl<T> Shared<T> {
    pub fn new(v: T) -> Self {
        Self(UnsafeCell::new(v))
    }

    pub fn get(&self) -> *mut T {
        self.0.get()
    }

    pub fn into_inner(self) -> T {
        self.0.into_inner()
    }
}
