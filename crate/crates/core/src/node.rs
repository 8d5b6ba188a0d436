//! Queue nodes and per-thread waiting context.

use alloc::sync::Arc;
use core::cell::{Cell, UnsafeCell};
use core::ptr;
use core::sync::atomic::{AtomicBool, AtomicPtr, AtomicU64, Ordering};

use crate::park::{wait_until, Parker, WaitOutcome, WaitPolicy};
use crate::rng::{bernoulli_hit, XorShift64};

/// Sentinel meaning "no predecessor observed".
pub const NO_PREDECESSOR: u64 = u64::MAX;

/// Per-thread state a waiter brings to every acquisition: its parker, its
/// PRNG for Bernoulli trials, and a park counter.
///
/// Not `Sync`; each thread owns exactly one.
pub struct ThreadCtx {
    id: usize,
    // from Arc::into_raw, released in Drop
    parker: *const dyn Parker,
    rng: Cell<XorShift64>,
    parks: Cell<u64>,
}

// The context may move to the thread that will own it; it is never shared.
unsafe impl Send for ThreadCtx {}

impl ThreadCtx {
    pub fn new(id: usize, parker: Arc<dyn Parker>, seed: u64) -> Self {
        Self::with_rng(id, parker, XorShift64::for_thread(seed, id as u64))
    }

    pub fn with_rng(id: usize, parker: Arc<dyn Parker>, rng: XorShift64) -> Self {
        Self {
            id,
            parker: Arc::into_raw(parker),
            rng: Cell::new(rng),
            parks: Cell::new(0),
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn parker(&self) -> &dyn Parker {
        // SAFETY: we hold one strong count for our whole lifetime.
        unsafe { &*self.parker }
    }

    pub(crate) fn parker_ptr(&self) -> *const dyn Parker {
        self.parker
    }

    /// Number of waits that ended after at least one park.
    pub fn park_count(&self) -> u64 {
        self.parks.get()
    }

    pub fn rng(&self) -> XorShift64 {
        self.rng.get()
    }

    pub fn next_u64(&self) -> u64 {
        let mut r = self.rng.get();
        let v = r.next_u64();
        self.rng.set(r);
        v
    }

    pub fn below(&self, bound: u64) -> u64 {
        let mut r = self.rng.get();
        let v = r.below(bound);
        self.rng.set(r);
        v
    }

    /// Bernoulli trial with probability `1 / denominator`. A zero denominator
    /// never hits.
    pub fn bernoulli(&self, denominator: u64) -> bool {
        let mut r = self.rng.get();
        let hit = bernoulli_hit(&mut r, denominator).unwrap_or(false);
        self.rng.set(r);
        hit
    }

    /// Wait for `node`'s grant under `policy`, counting parks.
    pub fn wait_for_grant(&self, node: &QueueNode, policy: WaitPolicy) -> WaitOutcome {
        let outcome = wait_until(self.parker(), policy, &node.grant);
        if outcome == WaitOutcome::GrantedParked {
            self.parks.set(self.parks.get() + 1);
        }
        outcome
    }
}

impl Drop for ThreadCtx {
    fn drop(&mut self) {
        // SAFETY: balances the into_raw in the constructor.
        unsafe { drop(Arc::from_raw(self.parker)) }
    }
}

/// A linkable waiter record: the unit of MCS chains, passive lists, LIFO
/// stacks and condition-variable queues.
///
/// A node belongs to at most one structure at a time and must stay put (and
/// alive) while any lock or queue can reach it. The owning thread keeps it on
/// its stack across `acquire .. release`.
pub struct QueueNode {
    pub(crate) next: AtomicPtr<QueueNode>,
    pub(crate) grant: AtomicBool,
    // written by the owner before the node is published
    parker: UnsafeCell<Option<*const dyn Parker>>,
    // passive-list back link; only touched by the current lock owner
    pub(crate) prev: Cell<*mut QueueNode>,
    pub(crate) slow: Cell<bool>,
    tag: AtomicU64,
    pred_tag: AtomicU64,
}

unsafe impl Send for QueueNode {}
unsafe impl Sync for QueueNode {}

impl Default for QueueNode {
    fn default() -> Self {
        Self::new()
    }
}

impl QueueNode {
    pub const fn new() -> Self {
        Self {
            next: AtomicPtr::new(ptr::null_mut()),
            grant: AtomicBool::new(false),
            parker: UnsafeCell::new(None),
            prev: Cell::new(ptr::null_mut()),
            slow: Cell::new(false),
            tag: AtomicU64::new(0),
            pred_tag: AtomicU64::new(NO_PREDECESSOR),
        }
    }

    /// Diagnostic label chosen by the owner (for example a per-acquisition
    /// sequence number).
    pub fn set_tag(&self, tag: u64) {
        self.tag.store(tag, Ordering::Relaxed);
    }

    pub fn tag(&self) -> u64 {
        self.tag.load(Ordering::Relaxed)
    }

    /// Tag of the node this one queued behind, or [`NO_PREDECESSOR`].
    pub fn pred_tag(&self) -> u64 {
        self.pred_tag.load(Ordering::Relaxed)
    }

    pub(crate) fn set_pred_tag(&self, tag: u64) {
        self.pred_tag.store(tag, Ordering::Relaxed);
    }

    pub fn is_granted(&self) -> bool {
        self.grant.load(Ordering::Acquire)
    }

    pub(crate) fn as_ptr(&self) -> *mut QueueNode {
        self as *const QueueNode as *mut QueueNode
    }

    /// Reset for a new wait episode and bind to the caller's parker.
    pub(crate) fn prepare(&self, ctx: &ThreadCtx) {
        self.next.store(ptr::null_mut(), Ordering::Relaxed);
        self.grant.store(false, Ordering::Relaxed);
        self.prev.set(ptr::null_mut());
        self.slow.set(false);
        self.pred_tag.store(NO_PREDECESSOR, Ordering::Relaxed);
        // SAFETY: the node is not yet reachable by any other thread.
        unsafe { *self.parker.get() = Some(ctx.parker_ptr()) };
    }

    /// Set the grant flag of `node` and unpark its owner.
    ///
    /// # Safety
    ///
    /// `node` must be live and its owner blocked waiting for this grant. Once
    /// the flag is set the owner may return and free the node, so the node
    /// is not touched afterwards; the parker is kept alive by a temporary
    /// strong count taken beforehand.
    pub(crate) unsafe fn grant(node: *const QueueNode) {
        let parker = unsafe { Self::pin_parker(node) };
        unsafe { (*node).grant.store(true, Ordering::Release) };
        if let Some(p) = parker {
            p.unpark();
        }
    }

    /// Take a strong reference to the parker bound to `node`.
    ///
    /// # Safety
    ///
    /// `node` must be live and its owner's context must still exist.
    pub(crate) unsafe fn pin_parker(node: *const QueueNode) -> Option<Arc<dyn Parker>> {
        let raw = unsafe { *(*node).parker.get() };
        raw.map(|p| unsafe {
            Arc::increment_strong_count(p);
            Arc::from_raw(p)
        })
    }
}

/// Intrusive doubly-ended list of nodes linked through `next`/`prev`.
///
/// Not synchronized; the owner of the structure that embeds it provides
/// exclusion.
pub(crate) struct NodeList {
    head: *mut QueueNode,
    tail: *mut QueueNode,
    len: usize,
}

unsafe impl Send for NodeList {}

impl NodeList {
    pub(crate) const fn new() -> Self {
        Self { head: ptr::null_mut(), tail: ptr::null_mut(), len: 0 }
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.head.is_null()
    }

    /// # Safety
    /// `n` is live, not on any other structure, and stays live until removed.
    pub(crate) unsafe fn push_front(&mut self, n: *mut QueueNode) {
        unsafe {
            (*n).prev.set(ptr::null_mut());
            (*n).next.store(self.head, Ordering::Relaxed);
            if self.head.is_null() {
                self.tail = n;
            } else {
                (*self.head).prev.set(n);
            }
        }
        self.head = n;
        self.len += 1;
    }

    /// # Safety
    /// As for [`NodeList::push_front`].
    pub(crate) unsafe fn push_back(&mut self, n: *mut QueueNode) {
        unsafe {
            (*n).next.store(ptr::null_mut(), Ordering::Relaxed);
            (*n).prev.set(self.tail);
            if self.tail.is_null() {
                self.head = n;
            } else {
                (*self.tail).next.store(n, Ordering::Relaxed);
            }
        }
        self.tail = n;
        self.len += 1;
    }

    pub(crate) fn pop_front(&mut self) -> Option<*mut QueueNode> {
        if self.head.is_null() {
            return None;
        }
        let n = self.head;
        // SAFETY: nodes on the list are live by the push contract.
        unsafe {
            self.head = (*n).next.load(Ordering::Relaxed);
            if self.head.is_null() {
                self.tail = ptr::null_mut();
            } else {
                (*self.head).prev.set(ptr::null_mut());
            }
            (*n).next.store(ptr::null_mut(), Ordering::Relaxed);
        }
        self.len -= 1;
        Some(n)
    }

    pub(crate) fn pop_back(&mut self) -> Option<*mut QueueNode> {
        if self.tail.is_null() {
            return None;
        }
        let n = self.tail;
        // SAFETY: as above.
        unsafe {
            self.tail = (*n).prev.get();
            if self.tail.is_null() {
                self.head = ptr::null_mut();
            } else {
                (*self.tail).next.store(ptr::null_mut(), Ordering::Relaxed);
            }
            (*n).prev.set(ptr::null_mut());
        }
        self.len -= 1;
        Some(n)
    }
}
