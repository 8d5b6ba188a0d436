//! Repeated runs, result summaries and CSV output.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use malthus_core::metrics::{AdmissionHistory, FairnessReport};
use malthus_core::softlru::DisplacementStats;

use crate::config::BenchConfig;
use crate::error::BenchError;
use crate::workloads::{run_once, Aux, RunOutput};

/// CSV header, in column order.
pub const CSV_COLUMNS: [&str; 15] = [
    "benchmark",
    "lock",
    "threads",
    "duration_s",
    "runs",
    "total_ops",
    "avg_lwss",
    "mttr",
    "gini",
    "rstddev",
    "park_count",
    "locks_per_message",
    "lru_miss_rate",
    "lru_other_evictions",
    "handover_ns",
];

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub benchmark: String,
    pub lock: String,
    pub threads: usize,
    pub duration_s: f64,
    pub runs: usize,
    pub total_ops: u64,
    pub per_thread_ops: Vec<u64>,
    pub fairness: Option<FairnessReport>,
    pub park_count: u64,
    pub history: AdmissionHistory,
    pub history_truncated: bool,
    pub aux: Aux,
}

impl BenchResult {
    pub fn lru(&self) -> Option<DisplacementStats> {
        self.aux.lru
    }

    /// Average distinct grantees per pool-grant window.
    pub fn grant_lwss(&self, window: usize) -> Option<f64> {
        let g = self.aux.grants.as_ref()?;
        malthus_core::metrics::avg_lwss(g, window).ok()
    }

    pub fn csv_record(&self) -> Vec<String> {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        let f = self.fairness.as_ref();
        vec![
            self.benchmark.clone(),
            self.lock.clone(),
            self.threads.to_string(),
            self.duration_s.to_string(),
            self.runs.to_string(),
            self.total_ops.to_string(),
            opt(f.map(|f| f.avg_lwss)),
            opt(f.and_then(|f| f.mttr)),
            opt(f.map(|f| f.gini)),
            opt(f.and_then(|f| f.rstddev)),
            self.park_count.to_string(),
            opt(self.aux.locks_per_message),
            opt(self.aux.lru.map(|s| s.miss_rate())),
            opt(self.aux.lru.map(|s| s.other_evictions)),
            opt(self.aux.handover_ns),
        ]
    }
}

/// Admissions treated as warm-up: the first tenth of the history rounded up
/// to whole windows, and at least one window. Histories shorter than three
/// windows are kept whole.
pub fn warmup_len(len: usize, window: usize) -> usize {
    if window == 0 || len < 3 * window {
        return 0;
    }
    (len / 10).div_ceil(window).max(1) * window
}

/// Fairness over the admission history with the warm-up prefix dropped.
/// Gini and RSTDDEV use per-thread admission counts from the same suffix.
pub fn fairness_after_warmup(history: &AdmissionHistory, window: usize) -> Result<Option<FairnessReport>, BenchError> {
    if history.is_empty() {
        return Ok(None);
    }
    let skip = warmup_len(history.len(), window);
    let trimmed;
    let h = if skip > 0 {
        trimmed = history.without_prefix(skip);
        &trimmed
    } else {
        history
    };
    Ok(Some(FairnessReport::from_history(h, window)?))
}

/// Summarize one run.
pub fn summarize(cfg: &BenchConfig, out: RunOutput) -> Result<BenchResult, BenchError> {
    let run = out.run;
    let total_ops = run.total_ops();
    let fairness = fairness_after_warmup(&run.history, cfg.window)?;
    Ok(BenchResult {
        benchmark: cfg.benchmark.to_string(),
        lock: cfg.lock.to_string(),
        threads: cfg.threads,
        duration_s: cfg.duration.as_secs_f64(),
        runs: 1,
        total_ops,
        per_thread_ops: run.per_thread_ops,
        fairness,
        park_count: run.parks,
        history: run.history,
        history_truncated: run.history_truncated,
        aux: out.aux,
    })
}

/// Run the configured benchmark `runs` times and keep the run with the
/// median total operations. Every run is returned, in execution order, as
/// the second element.
pub fn run_suite_all(cfg: &BenchConfig) -> Result<(BenchResult, Vec<BenchResult>), BenchError> {
    cfg.validate()?;
    let mut all = Vec::with_capacity(cfg.runs);
    for r in 0..cfg.runs {
        let mut c = cfg.clone();
        c.seed = cfg.seed.wrapping_add(r as u64);
        all.push(summarize(&c, run_once(&c)?)?);
    }
    let mut order: Vec<usize> = (0..all.len()).collect();
    order.sort_by_key(|&i| all[i].total_ops);
    let mut median = all[order[order.len() / 2]].clone();
    median.runs = cfg.runs;
    Ok((median, all))
}

/// Run the suite, append the median row to the CSV (if configured) and dump
/// its admission history (if configured).
pub fn run_suite(cfg: &BenchConfig) -> Result<BenchResult, BenchError> {
    let (median, _) = run_suite_all(cfg)?;
    if let Some(path) = &cfg.csv {
        emit_csv(&median, path)?;
    }
    if let Some(path) = &cfg.dump_history {
        dump_history(&median.history, path)?;
    }
    Ok(median)
}

/// Append one row, writing the header first if the file is new or empty.
pub fn emit_csv(result: &BenchResult, path: &Path) -> Result<(), BenchError> {
    let io = |source| BenchError::Io { path: path.to_path_buf(), source };
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    let csv_err = |source| BenchError::Csv { path: path.to_path_buf(), source };
    if fresh {
        w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    }
    w.write_record(result.csv_record()).map_err(csv_err)?;
    w.flush().map_err(io)?;
    Ok(())
}

/// One `ordinal,thread_id` line per admission.
pub fn dump_history(history: &AdmissionHistory, path: &Path) -> Result<(), BenchError> {
    let io = |source| BenchError::Io { path: path.to_path_buf(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for r in history.records() {
        writeln!(w, "{},{}", r.ordinal, r.thread_id).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Benchmark;
    use std::time::Duration;

    fn quick(runs: usize) -> BenchConfig {
        let mut c = BenchConfig::new(Benchmark::DelayStress, "mcs-s", 2).unwrap();
        c.duration = Duration::from_millis(30);
        c.runs = runs;
        c
    }

    #[test]
    fn median_is_middle_ranked_run() {
        let (m, all) = run_suite_all(&quick(7)).unwrap();
        let mut totals: Vec<u64> = all.iter().map(|r| r.total_ops).collect();
        totals.sort_unstable();
        assert_eq!(m.total_ops, totals[3]);
        assert_eq!(m.runs, 7);
    }

    #[test]
    fn single_run_is_identity() {
        let (m, all) = run_suite_all(&quick(1)).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(m.total_ops, all[0].total_ops);
        assert_eq!(m.total_ops, m.per_thread_ops.iter().sum::<u64>());
    }

    #[test]
    fn warmup_window_dropped_only_with_enough_history() {
        let ids: Vec<usize> = (0..30).map(|i| if i < 10 { 0 } else { i % 2 }).collect();
        let h = AdmissionHistory::from_sequence(2, &ids).unwrap();
        let f = fairness_after_warmup(&h, 10).unwrap().unwrap();
        assert_eq!(f.avg_lwss, 2.0);
        assert_eq!(f.per_thread_counts, vec![10, 10]);
        assert_eq!(f.gini, 0.0);
        let f = fairness_after_warmup(&h, 11).unwrap().unwrap();
        assert!(f.avg_lwss < 2.0);
        assert!(fairness_after_warmup(&AdmissionHistory::default(), 10).unwrap().is_none());
    }

    #[test]
    fn warmup_is_a_tenth_in_whole_windows() {
        assert_eq!(warmup_len(29, 10), 0);
        assert_eq!(warmup_len(30, 10), 10);
        assert_eq!(warmup_len(250, 10), 30);
        assert_eq!(warmup_len(1_000_000, 1000), 100_000);
        assert_eq!(warmup_len(1_000_010, 1000), 101_000);
    }

    #[test]
    fn record_has_fixed_width() {
        let (m, _) = run_suite_all(&quick(1)).unwrap();
        let rec = m.csv_record();
        assert_eq!(rec.len(), CSV_COLUMNS.len());
        assert_eq!(rec[11], "");
        assert_eq!(rec[14], "");
    }
}
