//! Concurrency-restricting mutual exclusion.
//!
//! This crate holds the algorithmic half of malthus: the lock family (TAS,
//! MCS, MCSCR, LIFO-CR and LOITER), the CR-augmented condition variable and
//! semaphore, the admission-history fairness metrics and the software LRU
//! cache used by the interference benchmark.
//!
//! Everything here is `no_std` with `alloc`. Blocking is delegated to a
//! [`Parker`](park::Parker) supplied by the host; the `malthus` crate provides
//! one backed by OS threads.
//!
//! Locks are driven through [`RawLock`](locks::RawLock) with a caller-owned
//! [`QueueNode`](node::QueueNode) and a per-thread [`ThreadCtx`](node::ThreadCtx):
//!
//! ```
//! use std::sync::Arc;
//! use malthus_core::locks::{LockSpec, RawLock};
//! use malthus_core::node::{QueueNode, ThreadCtx};
//! use malthus_core::park::SpinParker;
//!
//! let lock = "mcscr-s".parse::<LockSpec>().unwrap().build();
//! let ctx = ThreadCtx::new(0, Arc::new(SpinParker::default()), 7);
//! let node = QueueNode::new();
//! let guard = lock.lock(&node, &ctx);
//! drop(guard);
//! ```
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod coordination;
pub mod error;
pub mod locks;
pub mod metrics;
pub mod node;
pub mod park;
pub mod rng;
pub mod softlru;

pub use error::Error;
