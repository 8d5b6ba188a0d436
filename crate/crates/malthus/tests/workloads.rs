use std::time::Duration;

use malthus::config::{BenchConfig, Benchmark};
use malthus::core::metrics;
use malthus::platform;
use malthus::suite::summarize;
use malthus::workloads::run_once;
use proptest::prelude::*;

const LOCKS: [&str; 5] = ["tas-s", "mcs-stp", "mcscr-park", "lifocr-s", "loiter-stp"];

fn records_every_op(b: Benchmark) -> bool {
    matches!(
        b,
        Benchmark::RandArray | Benchmark::RingWalker | Benchmark::DelayStress | Benchmark::KeyMap | Benchmark::LruCache
    )
}

#[test]
fn every_benchmark_under_every_lock_family() {
    for b in Benchmark::ALL {
        for lock in LOCKS {
            let mut c = BenchConfig::new(b, lock, 3).unwrap();
            c.duration = Duration::from_millis(40);
            c.sizes.array_elems = 1 << 12;
            c.sizes.buffer_words = 1 << 10;
            let r = summarize(&c, run_once(&c).unwrap_or_else(|e| panic!("{b} {lock}: {e}"))).unwrap();
            assert_eq!(r.total_ops, r.per_thread_ops.iter().sum::<u64>(), "{b} {lock}");
            if records_every_op(b) {
                assert_eq!(r.history.len() as u64, r.total_ops, "{b} {lock}");
                assert_eq!(r.history.per_thread_counts(), r.per_thread_ops, "{b} {lock}");
            }
            assert_eq!(r.csv_record().len(), 15);
        }
    }
}

#[test]
fn cr_lock_admits_every_thread_eventually() {
    // A small fairness denominator keeps the passive set moving.
    let mut c = BenchConfig::new(Benchmark::DelayStress, "mcscr-stp", 8).unwrap().with_fairness_denominator(20);
    c.duration = Duration::from_millis(600);
    let r = summarize(&c, run_once(&c).unwrap()).unwrap();
    assert!(r.per_thread_ops.iter().all(|&o| o > 0), "{:?}", r.per_thread_ops);
    let worst = metrics::longest_absence(&r.history).into_iter().max().unwrap();
    assert!((worst as usize) < r.history.len());
}

#[test]
fn producer_consumer_reports_per_message_cost() {
    for (lock, a) in [("mcs-s", 1), ("mcscr-stp", 1000), ("lifocr-park", 0)] {
        let mut c = BenchConfig::new(Benchmark::ProducerConsumer, lock, 4).unwrap();
        c.duration = Duration::from_millis(150);
        c.cv_append_denom = a;
        let out = run_once(&c).unwrap();
        let messages = out.aux.messages.unwrap();
        assert!(messages > 0, "{lock}");
        // every message costs at least one producer and one consumer entry
        assert!(out.aux.locks_per_message.unwrap() >= 2.0, "{lock}");
    }
}

#[test]
fn semaphore_pool_never_waits_on_the_condvar() {
    let mut c = BenchConfig::new(Benchmark::BufferPoolSemaphore, "mcs-park", 12).unwrap();
    c.duration = Duration::from_millis(150);
    c.cv_append_denom = 0;
    let out = run_once(&c).unwrap();
    assert_eq!(out.aux.pool_waits, Some(0));
    let grants = out.aux.grants.unwrap();
    assert_eq!(grants.len() as u64, out.run.total_ops());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn thread_streams_replay_from_seed(seed in any::<u64>(), id in 0usize..64) {
        let (a, b) = (platform::thread_ctx(id, seed), platform::thread_ctx(id, seed));
        let other = platform::thread_ctx(id + 1, seed);
        let xs: Vec<u64> = (0..32).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..32).map(|_| b.next_u64()).collect();
        let zs: Vec<u64> = (0..32).map(|_| other.next_u64()).collect();
        prop_assert_eq!(&xs, &ys);
        prop_assert_ne!(&xs, &zs);
    }
}
