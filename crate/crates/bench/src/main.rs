use std::fs::File;
use std::io::{self, BufReader, Read};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use ife_bench::chart::emit_speedup_chart;
use ife_bench::grid::{run_grid, BenchReport, GridConfig};
use ife_bench::table::{emit_level_table, LevelColumn};
use ife_bench::workload::{generate_sources, WorkloadSpec};
use ife_bench::BenchError;
use ife_core::dispatcher::DEFAULT_OUTPUT_CHUNK;
use ife_core::{
    generate_random_graph, load_edge_list, CsrGraph, DispatchPolicy, LevelStat, LoadOptions,
    MorselSizes, NodeId, PolicyKind, ReturnMode,
};

/// Runs shortest-path query grids over dispatch policies and thread counts.
#[derive(Debug, Parser)]
#[command(name = "ife-bench", version)]
struct Args {
    /// Edge list (`u v` per line) or binary snapshot.
    #[arg(long, conflicts_with = "random", required_unless_present = "random")]
    graph: Option<PathBuf>,

    /// Random graph as NODES:AVG_DEGREE:SEED.
    #[arg(long)]
    random: Option<String>,

    /// Treat every edge as bidirectional.
    #[arg(long)]
    undirected: bool,

    #[arg(long, value_delimiter = ',', default_value = "ntks")]
    policy: Vec<PolicyKind>,

    /// Concurrent source morsels for ntks and ntkms; repeat or comma-separate to sweep.
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,

    #[arg(long, value_delimiter = ',', default_value = "1")]
    threads: Vec<usize>,

    /// Number of random sources.
    #[arg(long, default_value_t = 8, conflicts_with = "source_file")]
    sources: usize,

    /// Whitespace-separated source ids.
    #[arg(long)]
    source_file: Option<PathBuf>,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Minimum depth each random source must reach.
    #[arg(long, default_value_t = 3)]
    min_depth: u32,

    #[arg(long = "return", default_value = "lengths")]
    return_mode: ReturnMode,

    /// Whitespace-separated destination ids; all nodes when absent.
    #[arg(long)]
    dest_file: Option<PathBuf>,

    /// Cap on paths emitted per (source, destination) pair.
    #[arg(long)]
    max_paths: Option<usize>,

    /// Frontier morsel size, dense and sparse.
    #[arg(long)]
    frontier_morsel: Option<usize>,

    #[arg(long, default_value_t = DEFAULT_OUTPUT_CHUNK)]
    output_morsel: usize,

    #[arg(long, default_value_t = 3)]
    reps: usize,

    #[arg(long, default_value_t = 1)]
    warmup: usize,

    /// Check the first measured run of each cell against the serial oracle.
    #[arg(long)]
    verify: bool,

    #[arg(long)]
    csv: Option<PathBuf>,

    #[arg(long)]
    svg: Option<PathBuf>,

    /// Print per-level frontier sizes and times for each policy.
    #[arg(long)]
    level_table: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(report) if report.has_failures() => ExitCode::from(1),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ife-bench: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(args: &Args) -> Result<BenchReport, BenchError> {
    let (graph, dataset) = load_graph(args)?;
    let sources = match &args.source_file {
        Some(path) => read_ids(path, graph.num_nodes())?,
        None => {
            let spec = WorkloadSpec {
                min_reach_depth: args.min_depth,
                ..WorkloadSpec::sources(args.sources, args.seed)
            };
            generate_sources(&graph, &spec)?
        }
    };
    let destinations = match &args.dest_file {
        Some(path) => {
            let mut mask = vec![false; graph.num_nodes()];
            for d in read_ids(path, graph.num_nodes())? {
                mask[d.index()] = true;
            }
            Some(mask)
        }
        None => None,
    };

    let mut config = GridConfig::new(dataset, sources);
    config.policies = policies(&args.policy, &args.k)?;
    config.threads = args.threads.clone();
    config.return_mode = args.return_mode;
    config.destinations = destinations;
    config.max_paths = args.max_paths;
    if let Some(size) = args.frontier_morsel {
        config.morsel_sizes = MorselSizes::uniform(size);
    }
    config.output_chunk = args.output_morsel;
    config.repetitions = args.reps;
    config.warmup = args.warmup;
    config.verify = args.verify;

    let report = run_grid(&graph, &config)?;
    print_summary(&report);
    if args.level_table {
        print_level_tables(&report, &config);
    }
    if let Some(path) = &args.csv {
        report.write_csv(File::create(path)?)?;
    }
    if let Some(path) = &args.svg {
        emit_speedup_chart(&report, path)?;
    }
    Ok(report)
}

fn load_graph(args: &Args) -> Result<(CsrGraph, String), BenchError> {
    if let Some(spec) = &args.random {
        let parts: Vec<&str> = spec.split(':').collect();
        let bad = || {
            BenchError::Workload(format!(
                "--random expects NODES:AVG_DEGREE:SEED, got `{spec}`"
            ))
        };
        let [n, deg, seed] = parts[..] else {
            return Err(bad());
        };
        let n: usize = n.parse().map_err(|_| bad())?;
        let deg: f64 = deg.parse().map_err(|_| bad())?;
        let seed: u64 = seed.parse().map_err(|_| bad())?;
        let g = generate_random_graph(n, deg, seed)?;
        let g = if args.undirected { symmetrize(&g)? } else { g };
        return Ok((g, format!("random-{n}-{deg}-{seed}")));
    }
    let path = args
        .graph
        .as_deref()
        .expect("clap requires --graph or --random");
    let dataset = path
        .file_stem()
        .map_or_else(|| "graph".into(), |s| s.to_string_lossy().into_owned());
    let mut reader = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    let is_snapshot = {
        let mut probe = File::open(path)?;
        probe.read(&mut magic)? == 4 && &magic == b"IFE1"
    };
    let g = if is_snapshot {
        let g = CsrGraph::read_snapshot(&mut reader)?;
        if args.undirected {
            symmetrize(&g)?
        } else {
            g
        }
    } else {
        load_edge_list(reader, LoadOptions::directed(!args.undirected))?
    };
    Ok((g, dataset))
}

fn symmetrize(g: &CsrGraph) -> Result<CsrGraph, BenchError> {
    let mut arcs = Vec::with_capacity(2 * g.num_edges());
    for u in g.nodes() {
        for &v in g.neighbors(u) {
            arcs.push((u.0, v.0));
            arcs.push((v.0, u.0));
        }
    }
    Ok(CsrGraph::from_arcs(g.num_nodes(), &arcs, false)?)
}

fn read_ids(path: &Path, num_nodes: usize) -> Result<Vec<NodeId>, BenchError> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    text.split_whitespace()
        .map(|tok| {
            let id: u32 = tok.parse().map_err(|_| {
                BenchError::Workload(format!("{}: bad node id `{tok}`", path.display()))
            })?;
            if id as usize >= num_nodes {
                return Err(BenchError::Workload(format!(
                    "{}: node {id} is outside the graph ({num_nodes} nodes)",
                    path.display()
                )));
            }
            Ok(NodeId(id))
        })
        .collect()
}

/// Crosses policy kinds with k values. Kinds without k appear once.
fn policies(kinds: &[PolicyKind], ks: &[usize]) -> Result<Vec<DispatchPolicy>, BenchError> {
    let mut out: Vec<DispatchPolicy> = Vec::new();
    for &kind in kinds {
        let takes_k = matches!(
            kind,
            PolicyKind::SharedKSources | PolicyKind::SharedKMultiSource
        );
        if takes_k && !ks.is_empty() {
            for &k in ks {
                out.push(DispatchPolicy::new(kind, Some(k))?);
            }
        } else {
            out.push(DispatchPolicy::new(kind, None)?);
        }
    }
    out.dedup();
    Ok(out)
}

fn print_summary(report: &BenchReport) {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    use io::Write;
    let _ = writeln!(
        out,
        "{:<14} {:>7} {:>10} {:>9} {:>6}  status",
        "policy", "threads", "mean ms", "dev", "util"
    );
    for c in &report.cells {
        let util = report
            .runs
            .iter()
            .filter(|r| {
                !r.warmup && r.policy == c.policy && r.threads == c.threads && r.status.is_ok()
            })
            .map(|r| r.utilization)
            .fold((0.0, 0usize), |(s, n), u| (s + u, n + 1));
        let util = if util.1 > 0 {
            util.0 / util.1 as f64
        } else {
            0.0
        };
        let _ = writeln!(
            out,
            "{:<14} {:>7} {:>10.2} {:>9.4} {:>6.2}  {}",
            c.policy.to_string(),
            c.threads,
            c.mean.as_secs_f64() * 1e3,
            c.deviation,
            util,
            c.status
        );
    }
}

fn print_level_tables(report: &BenchReport, config: &GridConfig) {
    if config.sources.len() != 1 {
        println!(
            "note: level times are summed over {} source morsels",
            config.sources.len()
        );
    }
    for &policy in &config.policies {
        let per_thread: Vec<(usize, Vec<LevelStat>)> = config
            .threads
            .iter()
            .filter_map(|&t| {
                let run = report.runs.iter().find(|r| {
                    !r.warmup && r.policy == policy && r.threads == t && r.status.is_ok()
                })?;
                let levels = run
                    .level_sizes
                    .iter()
                    .zip(&run.level_times)
                    .enumerate()
                    .map(|(i, (&frontier_size, &elapsed))| LevelStat {
                        level: i as u32 + 1,
                        frontier_size,
                        elapsed,
                    })
                    .collect();
                Some((t, levels))
            })
            .collect();
        let columns: Vec<LevelColumn<'_>> = per_thread
            .iter()
            .map(|(t, levels)| LevelColumn {
                threads: *t,
                levels,
            })
            .collect();
        println!("\n{policy}");
        print!("{}", emit_level_table(&columns));
    }
}
