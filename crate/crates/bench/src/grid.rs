//! Policy-by-thread grids: repeated runs, aggregation and CSV output.

use std::fmt;
use std::io::Write;
use std::time::Duration;

use ife_core::{
    run_query, CsrGraph, DispatchPolicy, MorselSizes, NodeId, QueryResult, QuerySpec, ReturnMode,
};

use crate::error::BenchError;
use crate::verify::{verify_result, Expectation};

#[derive(Clone, Debug)]
pub struct GridConfig {
    pub dataset: String,
    pub policies: Vec<DispatchPolicy>,
    pub threads: Vec<usize>,
    pub return_mode: ReturnMode,
    pub sources: Vec<NodeId>,
    pub destinations: Option<Vec<bool>>,
    pub max_paths: Option<usize>,
    pub morsel_sizes: MorselSizes,
    pub output_chunk: usize,
    pub repetitions: usize,
    pub warmup: usize,
    pub verify: bool,
}

impl GridConfig {
    pub fn new(dataset: impl Into<String>, sources: Vec<NodeId>) -> Self {
        Self {
            dataset: dataset.into(),
            policies: vec![DispatchPolicy::shared_k_sources(
                ife_core::dispatcher::DEFAULT_K_SOURCES,
            )],
            threads: vec![1],
            return_mode: ReturnMode::Lengths,
            sources,
            destinations: None,
            max_paths: None,
            morsel_sizes: MorselSizes::default(),
            output_chunk: ife_core::dispatcher::DEFAULT_OUTPUT_CHUNK,
            repetitions: 3,
            warmup: 1,
            verify: false,
        }
    }

    fn spec<'g>(&self, g: &'g CsrGraph, policy: DispatchPolicy, threads: usize) -> QuerySpec<'g> {
        QuerySpec::new(g, self.sources.clone())
            .return_mode(self.return_mode)
            .policy(policy)
            .threads(threads)
            .morsel_sizes(self.morsel_sizes)
            .output_chunk(self.output_chunk)
            .max_paths(self.max_paths)
            .destinations(self.destinations.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    Mismatch(String),
    Error(String),
}

impl RunStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RunStatus::Ok)
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunStatus::Ok => f.write_str("ok"),
            RunStatus::Mismatch(m) => write!(f, "mismatch: {m}"),
            RunStatus::Error(m) => write!(f, "error: {m}"),
        }
    }
}

/// One execution of one cell.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub dataset: String,
    pub policy: DispatchPolicy,
    pub threads: usize,
    pub return_mode: ReturnMode,
    pub run: usize,
    pub warmup: bool,
    pub wall: Duration,
    pub utilization: f64,
    pub rows: usize,
    /// Frontier sizes summed over source morsels, indexed by level.
    pub level_sizes: Vec<usize>,
    /// Level times summed over source morsels, indexed by level.
    pub level_times: Vec<Duration>,
    pub status: RunStatus,
}

/// Aggregate over the measured (non-warmup) runs of a cell.
#[derive(Clone, Debug)]
pub struct CellSummary {
    pub dataset: String,
    pub policy: DispatchPolicy,
    pub threads: usize,
    pub return_mode: ReturnMode,
    pub runs: usize,
    pub mean: Duration,
    pub min: Duration,
    pub max: Duration,
    /// (max - min) / mean.
    pub deviation: f64,
    pub status: RunStatus,
}

#[derive(Clone, Debug, Default)]
pub struct BenchReport {
    pub runs: Vec<RunRecord>,
    pub cells: Vec<CellSummary>,
}

impl BenchReport {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn has_failures(&self) -> bool {
        self.cells.iter().any(|c| !c.status.is_ok())
    }

    pub fn extend(&mut self, other: BenchReport) {
        self.runs.extend(other.runs);
        self.cells.extend(other.cells);
    }

    pub fn cell(&self, policy: DispatchPolicy, threads: usize) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.policy == policy && c.threads == threads)
    }

    /// Mean wall time of `a` over `b` at the same thread count.
    pub fn mean_ratio(&self, a: DispatchPolicy, b: DispatchPolicy, threads: usize) -> Option<f64> {
        let (a, b) = (self.cell(a, threads)?, self.cell(b, threads)?);
        (b.mean > Duration::ZERO).then(|| a.mean.as_secs_f64() / b.mean.as_secs_f64())
    }

    /// Writes raw runs followed by cell aggregates under one header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.runs {
            w.write_record([
                if r.warmup { "warmup" } else { "run" }.to_string(),
                r.dataset.clone(),
                r.policy.kind.name().to_string(),
                r.policy.k.to_string(),
                r.threads.to_string(),
                r.return_mode.to_string(),
                r.run.to_string(),
                r.status.to_string(),
                r.rows.to_string(),
                millis(r.wall).to_string(),
                r.wall.as_micros().to_string(),
                format!("{:.3}", r.utilization),
                String::new(),
                String::new(),
                String::new(),
                join(r.level_sizes.iter()),
                join(
                    r.level_times
                        .iter()
                        .map(|t| format!("{:.3}", t.as_secs_f64() * 1e3)),
                ),
            ])?;
        }
        for c in &self.cells {
            w.write_record([
                "cell".to_string(),
                c.dataset.clone(),
                c.policy.kind.name().to_string(),
                c.policy.k.to_string(),
                c.threads.to_string(),
                c.return_mode.to_string(),
                c.runs.to_string(),
                c.status.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                millis(c.mean).to_string(),
                c.mean.as_micros().to_string(),
                format!("{:.4}", c.deviation),
                String::new(),
                String::new(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub const CSV_HEADER: [&str; 17] = [
    "kind",
    "dataset",
    "policy",
    "k",
    "threads",
    "return_mode",
    "run",
    "status",
    "rows",
    "wall_ms",
    "wall_us",
    "utilization",
    "mean_ms",
    "mean_us",
    "deviation",
    "level_sizes",
    "level_ms",
];

/// Columns that vary between identical runs.
pub const TIMING_COLUMNS: [&str; 7] = [
    "wall_ms",
    "wall_us",
    "utilization",
    "mean_ms",
    "mean_us",
    "deviation",
    "level_ms",
];

fn millis(d: Duration) -> u128 {
    (d.as_micros() + 500) / 1000
}

fn join<T: ToString>(items: impl Iterator<Item = T>) -> String {
    items.map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

/// Runs warmup plus measured repetitions for every (policy, threads) cell.
/// Per-cell failures are recorded as status; only invalid configs error.
pub fn run_grid(g: &CsrGraph, config: &GridConfig) -> Result<BenchReport, BenchError> {
    if config.repetitions == 0 {
        return Err(BenchError::Workload(
            "at least one measured repetition is required".into(),
        ));
    }
    if config.policies.is_empty() || config.threads.is_empty() {
        return Err(BenchError::Workload("grid has no cells".into()));
    }
    let mut report = BenchReport::default();
    for &policy in &config.policies {
        for &threads in &config.threads {
            run_cell(g, config, policy, threads, &mut report);
        }
    }
    Ok(report)
}

fn run_cell(
    g: &CsrGraph,
    config: &GridConfig,
    policy: DispatchPolicy,
    threads: usize,
    report: &mut BenchReport,
) {
    let spec = config.spec(g, policy, threads);
    let expect = Expectation {
        sources: &config.sources,
        destinations: config.destinations.as_deref(),
        mode: config.return_mode,
        max_paths: config.max_paths,
    };
    let first = report.runs.len();
    for run in 0..config.warmup + config.repetitions {
        let warmup = run < config.warmup;
        let record = |result: Option<&QueryResult>, status| {
            let (wall, utilization, rows, level_sizes, level_times) = match result {
                Some(r) => {
                    let (sizes, times) = per_level(r);
                    (
                        r.stats.wall,
                        r.stats.utilization(),
                        r.rows.len(),
                        sizes,
                        times,
                    )
                }
                None => (Duration::ZERO, 0.0, 0, Vec::new(), Vec::new()),
            };
            RunRecord {
                dataset: config.dataset.clone(),
                policy,
                threads,
                return_mode: config.return_mode,
                run: if warmup { run } else { run - config.warmup },
                warmup,
                wall,
                utilization,
                rows,
                level_sizes,
                level_times,
                status,
            }
        };
        match run_query(&spec) {
            Ok(result) => {
                let status = if config.verify && run == config.warmup {
                    match verify_result(g, &expect, &result) {
                        Ok(()) => RunStatus::Ok,
                        Err(m) => RunStatus::Mismatch(m),
                    }
                } else {
                    RunStatus::Ok
                };
                report.runs.push(record(Some(&result), status));
            }
            Err(e) => {
                report
                    .runs
                    .push(record(None, RunStatus::Error(e.to_string())));
                break;
            }
        }
    }
    report.cells.push(summarize(&report.runs[first..]));
}

fn per_level(result: &QueryResult) -> (Vec<usize>, Vec<Duration>) {
    let depth = result
        .stats
        .morsels
        .iter()
        .map(|m| m.levels.len())
        .max()
        .unwrap_or(0);
    let mut sizes = vec![0; depth];
    let mut times = vec![Duration::ZERO; depth];
    for m in &result.stats.morsels {
        for (i, l) in m.levels.iter().enumerate() {
            sizes[i] += l.frontier_size;
            times[i] += l.elapsed;
        }
    }
    (sizes, times)
}

fn summarize(runs: &[RunRecord]) -> CellSummary {
    let head = &runs[0];
    let status = runs
        .iter()
        .map(|r| &r.status)
        .find(|s| !s.is_ok())
        .cloned()
        .unwrap_or(RunStatus::Ok);
    let measured: Vec<Duration> = runs
        .iter()
        .filter(|r| !r.warmup && r.status.is_ok())
        .map(|r| r.wall)
        .collect();
    let (mean, min, max) = if measured.is_empty() {
        (Duration::ZERO, Duration::ZERO, Duration::ZERO)
    } else {
        // Microsecond resolution keeps the aggregate recomputable from wall_us.
        let us: Vec<u128> = measured.iter().map(|d| d.as_micros()).collect();
        let mean = us.iter().sum::<u128>() as f64 / us.len() as f64;
        (
            Duration::from_nanos((mean * 1e3).round() as u64),
            Duration::from_micros(*us.iter().min().unwrap() as u64),
            Duration::from_micros(*us.iter().max().unwrap() as u64),
        )
    };
    let deviation = if mean > Duration::ZERO {
        (max.as_micros() - min.as_micros()) as f64 / (mean.as_nanos() as f64 / 1e3)
    } else {
        0.0
    };
    CellSummary {
        dataset: head.dataset.clone(),
        policy: head.policy,
        threads: head.threads,
        return_mode: head.return_mode,
        runs: measured.len(),
        mean,
        min,
        max,
        deviation,
        status,
    }
}
