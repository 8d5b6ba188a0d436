use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;

use malthus::config::{BenchConfig, Benchmark, WorkloadSizes};
use malthus::suite::run_suite;
use malthus::BenchError;

/// Run a lock contention benchmark and append the median result to a CSV.
#[derive(Debug, Parser)]
#[command(name = "malthus-bench", version)]
struct Args {
    /// randarray, ringwalker, delaystress, producer-consumer, keymap,
    /// lrucache, bufferpool, bufferpool-sem or handover.
    #[arg(long)]
    benchmark: String,
    /// Lock kind with waiting suffix, e.g. mcs-s, mcscr-stp, lifocr-park, tas.
    #[arg(long)]
    lock: String,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Seconds per run.
    #[arg(long, default_value_t = 2.0)]
    duration: f64,
    /// Runs to take the median of (odd).
    #[arg(long, default_value_t = 7)]
    runs: usize,
    /// Base seed; MALTHUS_SEED is used when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// LWSS window in admissions.
    #[arg(long, default_value_t = 1000)]
    window: usize,
    /// Fairness graft / eldest grant denominator (0 disables).
    #[arg(long = "fairness-denom", default_value_t = 1000)]
    fairness_denom: u64,
    /// Condition variable append denominator: 1 is FIFO, 0 is pure prepend.
    #[arg(long = "cv-append-denom", default_value_t = 1)]
    cv_append_denom: u64,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the median run's admission history as `ordinal,thread_id` lines.
    #[arg(long = "dump-history")]
    dump_history: Option<PathBuf>,
    /// Use full-size arrays, key ranges and buffers.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    array_elems: Option<usize>,
    #[arg(long)]
    ring_elems: Option<usize>,
    #[arg(long)]
    key_range: Option<u64>,
    #[arg(long)]
    lru_capacity: Option<usize>,
    #[arg(long)]
    keyset: Option<usize>,
    #[arg(long)]
    pool_buffers: Option<usize>,
    #[arg(long)]
    buffer_words: Option<usize>,
    #[arg(long)]
    queue_bound: Option<usize>,
    #[arg(long)]
    consumers: Option<usize>,
}

fn config(a: &Args) -> Result<BenchConfig, BenchError> {
    let benchmark: Benchmark = a.benchmark.parse()?;
    if !(a.duration.is_finite() && a.duration > 0.0) {
        return Err(BenchError::Config("duration must be a positive number of seconds".into()));
    }
    let mut c = BenchConfig::new(benchmark, &a.lock, a.threads)?.with_fairness_denominator(a.fairness_denom);
    c.duration = Duration::from_secs_f64(a.duration);
    c.runs = a.runs;
    if let Some(s) = a.seed {
        c.seed = s;
    }
    c.window = a.window;
    c.cv_append_denom = a.cv_append_denom;
    c.csv = a.csv.clone();
    c.dump_history = a.dump_history.clone();
    let mut s = if a.paper_scale { WorkloadSizes::paper() } else { WorkloadSizes::desk() };
    s.array_elems = a.array_elems.unwrap_or(s.array_elems);
    s.ring_elems = a.ring_elems.unwrap_or(s.ring_elems);
    if let Some(k) = a.key_range {
        s.keymap_range = k;
        s.lru_range = k;
    }
    s.lru_capacity = a.lru_capacity.unwrap_or(s.lru_capacity);
    s.keyset = a.keyset.unwrap_or(s.keyset);
    s.pool_buffers = a.pool_buffers.unwrap_or(s.pool_buffers);
    s.buffer_words = a.buffer_words.unwrap_or(s.buffer_words);
    s.queue_bound = a.queue_bound.unwrap_or(s.queue_bound);
    s.consumers = a.consumers.unwrap_or(s.consumers);
    c.sizes = s;
    c.validate()?;
    Ok(c)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = config(&args).and_then(|c| run_suite(&c));
    match outcome {
        Ok(r) => {
            let f = r.fairness.as_ref();
            println!(
                "{} {} threads={} total_ops={} avg_lwss={} mttr={} gini={}",
                r.benchmark,
                r.lock,
                r.threads,
                r.total_ops,
                f.map_or("-".into(), |f| format!("{:.3}", f.avg_lwss)),
                f.and_then(|f| f.mttr).map_or("-".into(), |m| format!("{m}")),
                f.map_or("-".into(), |f| format!("{:.4}", f.gini)),
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("malthus-bench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
