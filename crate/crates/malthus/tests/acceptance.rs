//! Acceptance criteria. Each criterion prints one PASS or FAIL line; the
//! process exits non-zero if any fails.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::{Duration, Instant};

use malthus::config::{tune_for_host, BenchConfig, Benchmark};
use malthus::core::locks::{LockSpec, RawLock};
use malthus::core::metrics::{self, AdmissionHistory};
use malthus::core::node::QueueNode;
use malthus::core::rng::XorShift64;
use malthus::harness::Guarded;
use malthus::platform;
use malthus::suite::{run_suite_all, warmup_len, BenchResult};

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn median_f64(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn config(b: Benchmark, lock: &str, threads: usize, secs: f64, runs: usize) -> BenchConfig {
    let mut c = BenchConfig::new(b, lock, threads).expect("config");
    c.duration = Duration::from_secs_f64(secs);
    c.runs = runs;
    c
}

fn runs(c: &BenchConfig) -> Vec<BenchResult> {
    run_suite_all(c).expect("benchmark run").1
}

// ---------------------------------------------------------------------------

fn mutual_exclusion() -> Verdict {
    const THREADS: usize = 8;
    const ITERS: u64 = 200_000;
    let mut ok = true;
    let mut notes = Vec::new();
    for kind in ["tas", "mcs", "mcscr", "lifocr", "loiter"] {
        for suffix in ["s", "stp"] {
            let name = format!("{kind}-{suffix}");
            let spec = tune_for_host(name.parse::<LockSpec>().unwrap().with_spin_budget(platform::spin_budget()));
            let lock: Box<dyn RawLock> = spec.build();
            let counter = Guarded::new(0u64);
            let inside = AtomicBool::new(false);
            let overlaps = AtomicU64::new(0);
            let start = Instant::now();
            std::thread::scope(|s| {
                for id in 0..THREADS {
                    let (lock, counter, inside, overlaps) = (&lock, &counter, &inside, &overlaps);
                    s.spawn(move || {
                        let ctx = platform::thread_ctx(id, 17);
                        let node = QueueNode::new();
                        for _ in 0..ITERS {
                            lock.acquire(&node, &ctx);
                            if inside.swap(true, Ordering::Relaxed) {
                                overlaps.fetch_add(1, Ordering::Relaxed);
                            }
                            // SAFETY: lock held.
                            unsafe { *counter.get() += 1 };
                            inside.store(false, Ordering::Relaxed);
                            unsafe { lock.release(&node, &ctx) };
                        }
                    });
                }
            });
            let secs = start.elapsed().as_secs_f64();
            let total = counter.into_inner();
            let overlaps = overlaps.into_inner();
            let good = total == THREADS as u64 * ITERS && overlaps == 0 && secs < 60.0;
            ok &= good;
            notes.push(format!("{name} {total}/{overlaps}/{secs:.1}s"));
        }
    }
    verdict(ok, format!("count/overlaps/time: {}", notes.join(", ")))
}

// Independent brute-force metric definitions.

fn oracle_lwss(ids: &[usize], w: usize) -> f64 {
    let windows: Vec<&[usize]> = if ids.len() < w { vec![ids] } else { ids.chunks(w).filter(|c| c.len() == w).collect() };
    let distinct = |c: &[usize]| {
        let mut seen: Vec<usize> = Vec::new();
        for &t in c {
            if !seen.contains(&t) {
                seen.push(t);
            }
        }
        seen.len()
    };
    windows.iter().map(|c| distinct(c)).sum::<usize>() as f64 / windows.len() as f64
}

fn oracle_mttr(ids: &[usize]) -> Option<f64> {
    let mut samples = Vec::new();
    for i in 0..ids.len() {
        if let Some(j) = (0..i).rev().find(|&j| ids[j] == ids[i]) {
            samples.push((i - j - 1) as f64);
        }
    }
    (!samples.is_empty()).then(|| median_f64(samples))
}

fn oracle_gini(x: &[u64]) -> f64 {
    let total: u64 = x.iter().sum();
    if x.len() <= 1 || total == 0 {
        return 0.0;
    }
    let mut s: u128 = 0;
    for a in x {
        for b in x {
            s += a.abs_diff(*b) as u128;
        }
    }
    s as f64 / (2 * x.len() as u128 * total as u128) as f64
}

fn oracle_rstddev(x: &[u64]) -> f64 {
    // n * sum(x^2) - sum(x)^2 equals the sum of squared pairwise differences
    let mut pairs: u128 = 0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let d = x[i].abs_diff(x[j]) as u128;
            pairs += d * d;
        }
    }
    (pairs as f64).sqrt() / x.iter().sum::<u64>() as f64
}

fn metric_oracles() -> Verdict {
    let mut rng = XorShift64::new(0x5eed);
    let mut mismatches = 0;
    let mut first = String::new();
    for case in 0..1000 {
        let n = 1 + rng.below(10) as usize;
        let len = 1 + rng.below(5000) as usize;
        let w = 1 + rng.below(1200) as usize;
        // bias some histories toward long same-thread runs
        let sticky = rng.below(4);
        let mut ids = Vec::with_capacity(len);
        let mut cur = rng.below(n as u64) as usize;
        for _ in 0..len {
            if sticky == 0 || rng.below(sticky + 1) == 0 {
                cur = rng.below(n as u64) as usize;
            }
            ids.push(cur);
        }
        let h = AdmissionHistory::from_sequence(n, &ids).unwrap();
        let counts = h.per_thread_counts();
        let got = (
            metrics::avg_lwss(&h, w).unwrap(),
            metrics::mttr(&h).ok(),
            metrics::gini(&counts),
            metrics::rstddev(&counts).unwrap(),
        );
        let want = (oracle_lwss(&ids, w), oracle_mttr(&ids), oracle_gini(&counts), oracle_rstddev(&counts));
        if got != want {
            mismatches += 1;
            if first.is_empty() {
                first = format!("; first at case {case}: got {got:?}, want {want:?}");
            }
        }
    }
    verdict(mismatches == 0, format!("1000 histories, {mismatches} mismatches{first}"))
}

fn fifo_identity() -> Verdict {
    let r = &runs(&config(Benchmark::RandArray, "mcs-stp", 32, 10.0, 1))[0];
    let f = r.fairness.as_ref().expect("fairness");
    let pass = f.avg_lwss == 32.0 && f.mttr == Some(31.0) && f.gini < 0.01;
    verdict(pass, format!("avg_lwss={} mttr={:?} gini={:.5}", f.avg_lwss, f.mttr, f.gini))
}

fn cr_effect() -> Verdict {
    let r = &runs(&config(Benchmark::RandArray, "mcscr-stp", 32, 10.0, 1).with_fairness_denominator(1000))[0];
    let f = r.fairness.as_ref().expect("fairness");
    let idle = r.per_thread_ops.iter().filter(|&&o| o == 0).count();
    let mttr = f.mttr.unwrap_or(f64::INFINITY);
    let pass = f.avg_lwss <= 10.0 && mttr <= 6.0 && f.gini > 0.0 && f.gini <= 0.25 && idle == 0;
    verdict(pass, format!("avg_lwss={:.3} mttr={mttr} gini={:.4} idle_threads={idle}", f.avg_lwss, f.gini))
}

fn long_term_fairness() -> Verdict {
    const WINDOW: u64 = 50_000;
    let mut ok = true;
    let mut notes = Vec::new();
    for lock in ["mcscr-stp", "lifocr-stp"] {
        let c = config(Benchmark::RandArray, lock, 16, 12.0, 1).with_fairness_denominator(1000);
        let r = &runs(&c)[0];
        let worst = |h: &AdmissionHistory| metrics::longest_absence(h).into_iter().max().unwrap_or(u64::MAX);
        let steady = r.history.without_prefix(warmup_len(r.history.len(), c.window));
        let (all, after) = (worst(&r.history), worst(&steady));
        let good = steady.len() >= 1_000_000 && !r.history_truncated && after < WINDOW;
        ok &= good;
        notes.push(format!(
            "{lock}: {} admissions after warm-up, longest absence {after} ({all} including warm-up)",
            steady.len()
        ));
    }
    verdict(ok, notes.join("; "))
}

fn producer_consumer() -> Verdict {
    let lpm = |lock: &str, a: u64| {
        let mut c = config(Benchmark::ProducerConsumer, lock, 16, 4.0, 5);
        c.cv_append_denom = a;
        median_f64(runs(&c).iter().map(|r| r.aux.locks_per_message.expect("locks_per_message")).collect())
    };
    let fifo = lpm("mcs-park", 1);
    let cr = lpm("mcscr-park", 1000);
    let pass = fifo >= 2.7 && cr <= 2.5 && cr < fifo;
    verdict(pass, format!("FIFO mcs-park A=1: {fifo:.3}; CR mcscr-park A=1000: {cr:.3}"))
}

fn lru_interference() -> Verdict {
    let stats = |lock: &str| {
        let rs = runs(&config(Benchmark::LruCache, lock, 16, 4.0, 5));
        let s: Vec<_> = rs.iter().map(|r| r.lru().expect("lru stats")).collect();
        (
            median_f64(s.iter().map(|s| s.miss_rate()).collect()),
            median_f64(s.iter().map(|s| s.other_eviction_rate()).collect()),
            median_f64(s.iter().map(|s| s.other_fraction()).collect()),
        )
    };
    let (fm, fo, fs) = stats("mcs-s");
    let (cm, co, cs) = stats("mcscr-stp");
    let pass = cm < fm && co < fo;
    verdict(
        pass,
        format!(
            "miss rate {cm:.4} vs {fm:.4}, other evictions per lookup {co:.4} vs {fo:.4} \
             (share of evictions {cs:.4} vs {fs:.4}), mcscr-stp vs mcs-s"
        ),
    )
}

fn condvar_discipline() -> Verdict {
    let grant_lwss = |b: Benchmark, a: u64| {
        let mut c = config(b, "mcs-s", 16, 4.0, 3);
        c.cv_append_denom = a;
        median_f64(runs(&c).iter().map(|r| r.grant_lwss(100).expect("grant history")).collect())
    };
    let judge = |b: Benchmark| {
        let (lifo, mostly, fifo) = (grant_lwss(b, 0), grant_lwss(b, 1000), grant_lwss(b, 1));
        let pass = lifo < fifo && (mostly - lifo).abs() <= 0.2 * lifo;
        (pass, format!("{b} A=0 {lifo:.2}, A=1000 {mostly:.2}, A=1 {fifo:.2}"))
    };
    let (pass, cv) = judge(Benchmark::BufferPool);
    let (_, sem) = judge(Benchmark::BufferPoolSemaphore);
    verdict(pass, format!("distinct grantees per 100 grants, mcs-s: {cv} [semaphore variant, informational: {sem}]"))
}

fn handover() -> Verdict {
    let ns = |lock: &str| {
        let rs = runs(&config(Benchmark::Handover, lock, 4, 3.0, 3));
        median_f64(rs.iter().map(|r| r.aux.handover_ns.expect("handover") as f64).collect())
    };
    let spin = ns("mcs-s");
    let park = ns("mcs-park");
    verdict(spin < park, format!("median handover mcs-s {spin:.0} ns, mcs-park {park:.0} ns"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("mutual exclusion", mutual_exclusion),
        ("metric oracle equivalence", metric_oracles),
        ("FIFO baseline identity", fifo_identity),
        ("CR restriction effect", cr_effect),
        ("long-term fairness bound", long_term_fairness),
        ("producer-consumer fast flow", producer_consumer),
        ("software-cache interference", lru_interference),
        ("condvar discipline", condvar_discipline),
        ("handover directionality", handover),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let start = Instant::now();
        let v = check();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("{tag} {name} ({:.1}s): {}", start.elapsed().as_secs_f64(), v.detail);
        if !v.pass {
            failed.push(name);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: {} failed: {}", failed.len(), failed.join(", "));
        std::process::exit(1);
    }
}
