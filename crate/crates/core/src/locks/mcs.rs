//! Classic MCS queue lock: FIFO admission by direct handoff.
//!
//! Arrivals swap themselves into `tail`, link behind their predecessor and
//! wait on their own node. The owner is the implicit head of the chain.

use core::ptr;
use core::sync::atomic::{AtomicPtr, Ordering};

use super::{LockKind, LockSpec, RawLock};
use crate::node::{QueueNode, ThreadCtx};
use crate::park::WaitPolicy;

pub struct McsLock {
    tail: AtomicPtr<QueueNode>,
    spec: LockSpec,
}

impl McsLock {
    pub fn new(policy: WaitPolicy) -> Self {
        Self::from_spec(LockSpec::new(LockKind::Mcs, policy))
    }

    pub fn from_spec(spec: LockSpec) -> Self {
        Self { tail: AtomicPtr::new(ptr::null_mut()), spec }
    }

    pub fn is_locked(&self) -> bool {
        !self.tail.load(Ordering::Relaxed).is_null()
    }
}

/// Enqueue `node` at `tail` and wait until granted. Shared by every lock
/// built on the MCS chain.
pub(crate) fn enqueue_and_wait(tail: &AtomicPtr<QueueNode>, node: &QueueNode, ctx: &ThreadCtx, policy: WaitPolicy) {
    node.prepare(ctx);
    let me = node.as_ptr();
    let pred = tail.swap(me, Ordering::AcqRel);
    if pred.is_null() {
        return;
    }
    // SAFETY: the predecessor cannot finish its release until it sees our
    // link, so its node is still live here.
    unsafe {
        node.set_pred_tag((*pred).tag());
        (*pred).next.store(me, Ordering::Release);
    }
    ctx.wait_for_grant(node, policy);
}

/// Wait for an arriving successor to finish linking behind `node`.
pub(crate) fn await_next(node: &QueueNode, ctx: &ThreadCtx) -> *mut QueueNode {
    let mut i = 0u32;
    loop {
        let next = node.next.load(Ordering::Acquire);
        if !next.is_null() {
            return next;
        }
        // the linking thread may be descheduled between its swap and link
        ctx.parker().relax(i);
        i = i.wrapping_add(1);
    }
}

/// Plain MCS release.
///
/// # Safety
/// Caller owns the lock through `node`.
pub(crate) unsafe fn release_plain(tail: &AtomicPtr<QueueNode>, node: &QueueNode, ctx: &ThreadCtx) {
    let mut next = node.next.load(Ordering::Acquire);
    if next.is_null() {
        if tail
            .compare_exchange(node.as_ptr(), ptr::null_mut(), Ordering::Release, Ordering::Relaxed)
            .is_ok()
        {
            return;
        }
        next = await_next(node, ctx);
    }
    // SAFETY: the successor is blocked in enqueue_and_wait.
    unsafe { QueueNode::grant(next) };
}

impl RawLock for McsLock {
    fn acquire(&self, node: &QueueNode, ctx: &ThreadCtx) {
        enqueue_and_wait(&self.tail, node, ctx, self.spec.policy);
    }

    unsafe fn release(&self, node: &QueueNode, ctx: &ThreadCtx) {
        unsafe { release_plain(&self.tail, node, ctx) }
    }

    fn spec(&self) -> LockSpec {
        self.spec
    }
}
