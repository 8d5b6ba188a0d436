//! LIFO lock with periodic eldest-first grants.
//!
//! `top` is null when the lock is free, [`held_empty`] when held with no
//! waiters, and otherwise the most recently pushed waiter. Arrivals push with
//! CAS; only the owner pops, so the stack is single-consumer and free of ABA.

use core::ptr;
use core::sync::atomic::{AtomicPtr, AtomicU64, Ordering};

use super::{LockKind, LockSpec, RawLock};
use crate::node::{QueueNode, ThreadCtx};
use crate::park::WaitPolicy;

/// Distinguished `top` value: held, no waiters. Never dereferenced.
#[inline]
fn held_empty() -> *mut QueueNode {
    ptr::dangling_mut()
}

pub struct LifoCrLock {
    top: AtomicPtr<QueueNode>,
    fairness: AtomicU64,
    spec: LockSpec,
}

impl LifoCrLock {
    pub fn new(policy: WaitPolicy) -> Self {
        Self::from_spec(LockSpec::new(LockKind::LifoCr, policy))
    }

    pub fn from_spec(spec: LockSpec) -> Self {
        Self {
            top: AtomicPtr::new(ptr::null_mut()),
            fairness: AtomicU64::new(spec.fairness_denominator),
            spec,
        }
    }

    pub fn set_fairness_denominator(&self, d: u64) {
        self.fairness.store(d, Ordering::Relaxed);
    }

    pub fn is_free(&self) -> bool {
        self.top.load(Ordering::Relaxed).is_null()
    }

    pub fn has_waiters(&self) -> bool {
        let t = self.top.load(Ordering::Relaxed);
        !t.is_null() && t != held_empty()
    }

    /// Hand the lock to the bottom of the stack, below `top`. Returns false
    /// when `top` is the only waiter.
    ///
    /// # Safety
    /// Caller owns the lock; `top` is a waiter node read from the stack.
    unsafe fn grant_eldest(&self, top: *mut QueueNode) -> bool {
        let mut prev = ptr::null_mut::<QueueNode>();
        let mut cur = top;
        loop {
            let next = unsafe { (*cur).next.load(Ordering::Acquire) };
            if next.is_null() {
                break;
            }
            prev = cur;
            cur = next;
        }
        if prev.is_null() {
            return false;
        }
        unsafe {
            (*prev).next.store(ptr::null_mut(), Ordering::Relaxed);
            QueueNode::grant(cur);
        }
        true
    }
}

impl RawLock for LifoCrLock {
    fn acquire(&self, node: &QueueNode, ctx: &ThreadCtx) {
        node.prepare(ctx);
        let me = node.as_ptr();
        let mut top = self.top.load(Ordering::Relaxed);
        loop {
            if top.is_null() {
                match self.top.compare_exchange_weak(top, held_empty(), Ordering::Acquire, Ordering::Relaxed) {
                    Ok(_) => return,
                    Err(seen) => {
                        top = seen;
                        continue;
                    }
                }
            }
            let below = if top == held_empty() { ptr::null_mut() } else { top };
            node.next.store(below, Ordering::Relaxed);
            match self.top.compare_exchange_weak(top, me, Ordering::Release, Ordering::Relaxed) {
                Ok(_) => break,
                Err(seen) => top = seen,
            }
        }
        ctx.wait_for_grant(node, self.spec.policy);
    }

    unsafe fn release(&self, _node: &QueueNode, ctx: &ThreadCtx) {
        let mut top = self.top.load(Ordering::Acquire);
        if top == held_empty() {
            match self.top.compare_exchange(top, ptr::null_mut(), Ordering::Release, Ordering::Acquire) {
                Ok(_) => return,
                Err(seen) => top = seen,
            }
        }
        debug_assert!(!top.is_null() && top != held_empty());

        if ctx.bernoulli(self.fairness.load(Ordering::Relaxed)) && unsafe { self.grant_eldest(top) } {
            return;
        }

        let below = unsafe { (*top).next.load(Ordering::Relaxed) };
        let new_top = if below.is_null() { held_empty() } else { below };
        match self.top.compare_exchange(top, new_top, Ordering::AcqRel, Ordering::Acquire) {
            Ok(_) => unsafe { QueueNode::grant(top) },
            Err(head) => {
                // Newer arrivals sit above `top`; unlink and grant the node
                // right below the head we just saw instead of retrying.
                // SAFETY: `head` was pushed onto a non-empty stack, so it has
                // a successor, and only the owner edits links below the top.
                unsafe {
                    let victim = (*head).next.load(Ordering::Relaxed);
                    let after = (*victim).next.load(Ordering::Relaxed);
                    (*head).next.store(after, Ordering::Relaxed);
                    QueueNode::grant(victim);
                }
            }
        }
    }

    fn spec(&self) -> LockSpec {
        self.spec.with_fairness_denominator(self.fairness.load(Ordering::Relaxed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locks::tests::ctx;

    fn push_without_wait(lock: &LifoCrLock, node: &QueueNode, ctx: &ThreadCtx) {
        node.prepare(ctx);
        let top = lock.top.load(Ordering::Relaxed);
        assert!(!top.is_null());
        let below = if top == held_empty() { ptr::null_mut() } else { top };
        node.next.store(below, Ordering::Relaxed);
        lock.top.store(node.as_ptr(), Ordering::Release);
    }

    fn lock_with(d: u64) -> LifoCrLock {
        LifoCrLock::from_spec(LockSpec::new(LockKind::LifoCr, WaitPolicy::SpinUnbounded).with_fairness_denominator(d))
    }

    #[test]
    fn fast_acquire_and_release() {
        let lock = lock_with(0);
        let c = ctx(0);
        let n = QueueNode::new();
        lock.acquire(&n, &c);
        assert_eq!(lock.top.load(Ordering::Relaxed), held_empty());
        unsafe { lock.release(&n, &c) };
        assert!(lock.is_free());
    }

    #[test]
    fn newest_waiter_granted_first() {
        let lock = lock_with(0);
        let c = ctx(0);
        let (o, a, b) = (QueueNode::new(), QueueNode::new(), QueueNode::new());
        lock.acquire(&o, &c);
        push_without_wait(&lock, &a, &c);
        push_without_wait(&lock, &b, &c);
        assert_eq!(lock.top.load(Ordering::Relaxed), b.as_ptr());
        unsafe { lock.release(&o, &c) };
        assert!(b.is_granted() && !a.is_granted());
        unsafe { lock.release(&b, &c) };
        assert!(a.is_granted());
        assert_eq!(lock.top.load(Ordering::Relaxed), held_empty());
        unsafe { lock.release(&a, &c) };
        assert!(lock.is_free());
    }

    #[test]
    fn fairness_hit_grants_eldest() {
        let lock = lock_with(1);
        let c = ctx(0);
        let (o, a, b, cc) = (QueueNode::new(), QueueNode::new(), QueueNode::new(), QueueNode::new());
        lock.acquire(&o, &c);
        push_without_wait(&lock, &a, &c);
        push_without_wait(&lock, &b, &c);
        push_without_wait(&lock, &cc, &c);
        unsafe { lock.release(&o, &c) };
        assert!(a.is_granted());
        assert!(!b.is_granted() && !cc.is_granted());
        // stack is now [c, b]
        assert_eq!(b.next.load(Ordering::Relaxed), ptr::null_mut());
        unsafe { lock.release(&a, &c) };
        assert!(b.is_granted());
        // lone waiter: eldest == newest, popped normally
        unsafe { lock.release(&b, &c) };
        assert!(cc.is_granted());
        unsafe { lock.release(&cc, &c) };
        assert!(lock.is_free());
    }
}
