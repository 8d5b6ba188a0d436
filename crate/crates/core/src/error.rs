use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("bernoulli denominator must be at least 1")]
    ZeroDenominator,
    #[error("admission history is empty")]
    EmptyHistory,
    #[error("no thread re-acquired the lock; median time to reacquire is undefined")]
    NoReacquisition,
    #[error("window size must be at least 1")]
    ZeroWindow,
    #[error("mean of per-thread counts is zero")]
    ZeroMean,
    #[error("critical section cost must be positive")]
    ZeroCriticalSection,
    #[error("duplicate admission ordinal {0}")]
    DuplicateOrdinal(u64),
    #[error("admission ordinals are not contiguous: expected {expected}, found {found}")]
    OrdinalGap { expected: u64, found: u64 },
    #[error("thread id {thread_id} out of range for {thread_count} threads")]
    ThreadOutOfRange { thread_id: usize, thread_count: usize },
    #[error("caller does not hold the mutex")]
    NotOwner,
    #[error("unknown lock name `{0}`")]
    UnknownLock(alloc::string::String),
}
