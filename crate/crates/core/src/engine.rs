//! The IFE operator: worker loop, frontier extension, result output and the
//! serial reference search.

use std::collections::{HashMap, VecDeque};
use std::ops::Range;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use crate::algorithms::{EdgeCompute, LaneUpdate, ReturnMode};
use crate::dispatcher::{
    Acquired, BoundaryAction, DispatchPolicy, Dispatcher, Grab, Kernel, MorselConfig, MorselStats,
    Phase, SourceMorsel, DEFAULT_OUTPUT_CHUNK,
};
use crate::error::{Error, Result};
use crate::frontier::{FrontierMorsel, FrontierPair, MorselSizes};
use crate::graph::{CsrGraph, EdgeId, NodeId};
use crate::memory::MemoryBudget;
use crate::parents::ParentStore;

/// Everything needed to run one query.
#[derive(Clone, Debug)]
pub struct QuerySpec<'g> {
    pub graph: &'g CsrGraph,
    pub sources: Vec<NodeId>,
    /// One flag per node; `None` selects every node.
    pub destinations: Option<Vec<bool>>,
    pub return_mode: ReturnMode,
    pub policy: DispatchPolicy,
    pub num_threads: usize,
    pub morsel_sizes: MorselSizes,
    pub output_chunk: usize,
    pub max_paths_per_pair: Option<usize>,
    /// Cap on lane arrays plus parent arenas, in bytes.
    pub memory_limit: Option<usize>,
}

impl<'g> QuerySpec<'g> {
    pub fn new(graph: &'g CsrGraph, sources: Vec<NodeId>) -> Self {
        Self {
            graph,
            sources,
            destinations: None,
            return_mode: ReturnMode::Lengths,
            policy: DispatchPolicy::shared_k_sources(crate::dispatcher::DEFAULT_K_SOURCES),
            num_threads: 1,
            morsel_sizes: MorselSizes::default(),
            output_chunk: DEFAULT_OUTPUT_CHUNK,
            max_paths_per_pair: None,
            memory_limit: None,
        }
    }

    pub fn return_mode(mut self, mode: ReturnMode) -> Self {
        self.return_mode = mode;
        self
    }

    pub fn policy(mut self, policy: DispatchPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn threads(mut self, n: usize) -> Self {
        self.num_threads = n;
        self
    }

    pub fn morsel_sizes(mut self, sizes: MorselSizes) -> Self {
        self.morsel_sizes = sizes;
        self
    }

    pub fn output_chunk(mut self, chunk: usize) -> Self {
        self.output_chunk = chunk;
        self
    }

    pub fn max_paths(mut self, cap: Option<usize>) -> Self {
        self.max_paths_per_pair = cap;
        self
    }

    pub fn destinations(mut self, mask: Option<Vec<bool>>) -> Self {
        self.destinations = mask;
        self
    }

    /// Selects exactly the listed destinations.
    pub fn destination_list(self, dests: &[NodeId]) -> Self {
        let mut mask = vec![false; self.graph.num_nodes()];
        for d in dests {
            if let Some(slot) = mask.get_mut(d.index()) {
                *slot = true;
            }
        }
        self.destinations(Some(mask))
    }

    pub fn memory_limit(mut self, bytes: Option<usize>) -> Self {
        self.memory_limit = bytes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.graph.num_nodes();
        if self.num_threads == 0 {
            return Err(Error::InvalidQuery(
                "at least one thread is required".into(),
            ));
        }
        if self.num_threads >= u16::MAX as usize {
            return Err(Error::InvalidQuery(format!(
                "too many threads: {}",
                self.num_threads
            )));
        }
        if self.policy.k == 0 {
            return Err(Error::InvalidQuery("k must be at least 1".into()));
        }
        if self.morsel_sizes.dense == 0 || self.morsel_sizes.sparse == 0 || self.output_chunk == 0 {
            return Err(Error::InvalidQuery("morsel sizes must be positive".into()));
        }
        if let Some(s) = self.sources.iter().find(|s| s.index() >= n) {
            return Err(Error::InvalidQuery(format!(
                "source {s} is not a node of the graph"
            )));
        }
        if let Some(mask) = &self.destinations {
            if mask.len() != n {
                return Err(Error::InvalidQuery(format!(
                    "destination mask has {} entries for {n} nodes",
                    mask.len()
                )));
            }
        }
        if self.max_paths_per_pair == Some(0) {
            return Err(Error::InvalidQuery(
                "max paths per pair must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LengthRow {
    pub source: NodeId,
    pub destination: NodeId,
    pub length: u8,
}

/// A walk `nodes[0] -edges[0]-> nodes[1] ...`; `nodes.len() == edges.len() + 1`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeId>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Node and edge ids interleaved, starting and ending with a node.
    pub fn to_sequence(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.nodes.len() + self.edges.len());
        for (i, n) in self.nodes.iter().enumerate() {
            if i > 0 {
                out.push(self.edges[i - 1].0);
            }
            out.push(n.0 as u64);
        }
        out
    }

    /// Whether every edge id joins the neighboring nodes in `g`.
    pub fn is_walk_in(&self, g: &CsrGraph) -> bool {
        self.nodes.len() == self.edges.len() + 1
            && self
                .edges
                .iter()
                .enumerate()
                .all(|(i, &e)| g.edge_endpoints(e) == Some((self.nodes[i], self.nodes[i + 1])))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathRow {
    pub source: NodeId,
    pub destination: NodeId,
    pub path: Path,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rows {
    Lengths(Vec<LengthRow>),
    Paths(Vec<PathRow>),
}

impl Rows {
    pub fn len(&self) -> usize {
        match self {
            Rows::Lengths(r) => r.len(),
            Rows::Paths(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, Default)]
pub struct QueryStats {
    pub wall: Duration,
    /// Time each worker spent extending frontiers or emitting output.
    pub busy: Vec<Duration>,
    /// Retired morsels by id, each with its per-level breakdown.
    pub morsels: Vec<MorselStats>,
    pub morsels_launched: usize,
    pub max_live_morsels: usize,
    pub parent_records: usize,
    /// High-water mark of budgeted bytes.
    pub peak_budget_bytes: usize,
}

impl QueryStats {
    /// Summed busy time over `threads × wall`.
    pub fn utilization(&self) -> f64 {
        let capacity = self.wall.as_secs_f64() * self.busy.len() as f64;
        if capacity == 0.0 {
            return 0.0;
        }
        let busy: f64 = self.busy.iter().map(Duration::as_secs_f64).sum();
        busy / capacity
    }
}

#[derive(Clone, Debug)]
pub struct QueryResult {
    pub rows: Rows,
    pub stats: QueryStats,
}

impl QueryResult {
    /// Length rows; empty for a paths query.
    pub fn lengths(&self) -> &[LengthRow] {
        match &self.rows {
            Rows::Lengths(r) => r,
            Rows::Paths(_) => &[],
        }
    }

    /// Path rows; empty for a lengths query.
    pub fn paths(&self) -> &[PathRow] {
        match &self.rows {
            Rows::Paths(r) => r,
            Rows::Lengths(_) => &[],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceAction {
    Launch {
        sources: Vec<NodeId>,
    },
    Join,
    Extend {
        level: u32,
        begin: usize,
        end: usize,
    },
    Boundary(BoundaryAction),
    Output {
        begin: usize,
        end: usize,
    },
    Retire,
    Wait,
    Exit,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub worker: usize,
    pub morsel: Option<usize>,
    pub action: TraceAction,
}

#[derive(Debug)]
pub struct Replay {
    pub trace: Vec<TraceEvent>,
    pub result: QueryResult,
}

struct QueryContext<'q> {
    graph: &'q CsrGraph,
    dispatcher: Dispatcher,
    mask: Option<&'q [bool]>,
    mode: ReturnMode,
    cap: Option<usize>,
    budget: Arc<MemoryBudget>,
    aborted: AtomicBool,
    failure: Mutex<Option<Error>>,
}

impl<'q> QueryContext<'q> {
    fn new(spec: &'q QuerySpec<'q>) -> Self {
        let budget = MemoryBudget::new(spec.memory_limit);
        let config = MorselConfig {
            num_nodes: spec.graph.num_nodes(),
            mode: spec.return_mode,
            num_threads: spec.num_threads,
            sizes: spec.morsel_sizes,
            output_chunk: spec.output_chunk,
            budget: Arc::clone(&budget),
        };
        Self {
            graph: spec.graph,
            dispatcher: Dispatcher::new(spec.policy, config, spec.sources.clone()),
            mask: spec.destinations.as_deref(),
            mode: spec.return_mode,
            cap: spec.max_paths_per_pair,
            budget,
            aborted: AtomicBool::new(false),
            failure: Mutex::new(None),
        }
    }

    fn abort(&self, e: Error) {
        let mut failure = self.failure.lock().expect("failure slot poisoned");
        failure.get_or_insert(e);
        self.aborted.store(true, Ordering::Release);
    }

    fn is_aborted(&self) -> bool {
        self.aborted.load(Ordering::Acquire)
    }
}

#[derive(Default)]
struct RowBuffer {
    lengths: Vec<LengthRow>,
    paths: Vec<PathRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Step {
    Worked,
    Idle,
    Exit,
}

struct Worker<'c, 'q> {
    id: usize,
    ctx: &'c QueryContext<'q>,
    current: Option<Arc<SourceMorsel>>,
    rows: RowBuffer,
    busy: Duration,
}

impl<'c, 'q> Worker<'c, 'q> {
    fn new(id: usize, ctx: &'c QueryContext<'q>) -> Self {
        Self {
            id,
            ctx,
            current: None,
            rows: RowBuffer::default(),
            busy: Duration::ZERO,
        }
    }

    /// One pass of the operator loop: pick a morsel, then process one frontier
    /// or output morsel of it.
    fn step(&mut self, mut trace: Option<&mut Vec<TraceEvent>>) -> Result<Step> {
        let id = self.id;
        let mut log = |morsel: Option<usize>, action: TraceAction| {
            if let Some(t) = trace.as_deref_mut() {
                t.push(TraceEvent {
                    worker: id,
                    morsel,
                    action,
                });
            }
        };
        let dispatcher = &self.ctx.dispatcher;
        let sm = match dispatcher.grab_src_morsel_if_necessary(&mut self.current)? {
            Grab::Morsel(sm, how) => {
                match how {
                    Acquired::Launched => log(
                        Some(sm.id()),
                        TraceAction::Launch {
                            sources: sm.sources().to_vec(),
                        },
                    ),
                    Acquired::Joined => log(Some(sm.id()), TraceAction::Join),
                    Acquired::Kept => {}
                }
                sm
            }
            Grab::Wait => {
                log(None, TraceAction::Wait);
                return Ok(Step::Idle);
            }
            Grab::Exhausted => {
                log(None, TraceAction::Exit);
                return Ok(Step::Exit);
            }
        };
        let started = Instant::now();
        let step = match sm.phase() {
            Phase::FrontierExtension => match sm.grab_frontier_morsel() {
                Some(fm) => {
                    extend_frontier(self.ctx.graph, &sm, &fm, self.id)?;
                    log(
                        Some(sm.id()),
                        TraceAction::Extend {
                            level: fm.epoch,
                            begin: fm.begin,
                            end: fm.end,
                        },
                    );
                    let action = sm.check_if_frontier_finished(&fm);
                    if action != BoundaryAction::None {
                        log(Some(sm.id()), TraceAction::Boundary(action));
                    }
                    Step::Worked
                }
                None => Step::Idle,
            },
            Phase::Output => match sm.grab_output_morsel() {
                Some(range) => {
                    output_paths(
                        &sm,
                        range.clone(),
                        self.ctx.mask,
                        self.ctx.mode,
                        self.ctx.cap,
                        &mut self.rows,
                    );
                    log(
                        Some(sm.id()),
                        TraceAction::Output {
                            begin: range.start,
                            end: range.end,
                        },
                    );
                    if dispatcher.complete_output(&sm, range) {
                        log(Some(sm.id()), TraceAction::Retire);
                        self.current = None;
                    }
                    Step::Worked
                }
                None => Step::Idle,
            },
            Phase::Retired => Step::Idle,
        };
        if step == Step::Worked {
            self.busy += started.elapsed();
        }
        Ok(step)
    }
}

/// Runs `spec` on `spec.num_threads` worker threads.
pub fn run_query(spec: &QuerySpec<'_>) -> Result<QueryResult> {
    spec.validate()?;
    let ctx = QueryContext::new(spec);
    let started = Instant::now();
    let workers: Vec<(RowBuffer, Duration)> = thread::scope(|s| {
        let handles: Vec<_> = (0..spec.num_threads)
            .map(|id| {
                let ctx = &ctx;
                s.spawn(move || {
                    let mut worker = Worker::new(id, ctx);
                    while !ctx.is_aborted() {
                        match worker.step(None) {
                            Ok(Step::Worked) => {}
                            Ok(Step::Idle) => thread::yield_now(),
                            Ok(Step::Exit) => break,
                            Err(e) => {
                                ctx.abort(e);
                                break;
                            }
                        }
                    }
                    (worker.rows, worker.busy)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let wall = started.elapsed();
    finish(&ctx, workers, wall)
}

/// Steps `spec.num_threads` simulated workers round-robin on the calling
/// thread and records every dispatch decision.
pub fn replay_policy_single_threaded(spec: &QuerySpec<'_>) -> Result<Replay> {
    spec.validate()?;
    let ctx = QueryContext::new(spec);
    let started = Instant::now();
    let mut trace = Vec::new();
    let mut workers: Vec<Worker> = (0..spec.num_threads)
        .map(|id| Worker::new(id, &ctx))
        .collect();
    let mut exited = vec![false; workers.len()];
    while exited.iter().any(|e| !e) {
        let mut progressed = false;
        for (w, done) in workers.iter_mut().zip(exited.iter_mut()) {
            if *done {
                continue;
            }
            match w.step(Some(&mut trace))? {
                Step::Worked => progressed = true,
                Step::Idle => {}
                Step::Exit => {
                    *done = true;
                    progressed = true;
                }
            }
        }
        if !progressed {
            return Err(Error::InvalidQuery(
                "dispatcher stalled: no simulated worker could make progress".into(),
            ));
        }
    }
    let wall = started.elapsed();
    let outputs = workers.into_iter().map(|w| (w.rows, w.busy)).collect();
    let result = finish(&ctx, outputs, wall)?;
    Ok(Replay { trace, result })
}

fn finish(
    ctx: &QueryContext<'_>,
    workers: Vec<(RowBuffer, Duration)>,
    wall: Duration,
) -> Result<QueryResult> {
    if let Some(e) = ctx.failure.lock().expect("failure slot poisoned").take() {
        return Err(e);
    }
    let mut busy = Vec::with_capacity(workers.len());
    let rows = match ctx.mode {
        ReturnMode::Lengths => {
            let mut all = Vec::new();
            for (rows, b) in workers {
                all.extend(rows.lengths);
                busy.push(b);
            }
            all.sort_unstable();
            Rows::Lengths(all)
        }
        ReturnMode::Paths => {
            let mut all = Vec::new();
            for (rows, b) in workers {
                all.extend(rows.paths);
                busy.push(b);
            }
            // Stable: rows of one pair keep their enumeration order.
            all.sort_by_key(|r| (r.source, r.destination));
            Rows::Paths(all)
        }
    };
    let morsels = ctx.dispatcher.finished();
    Ok(QueryResult {
        rows,
        stats: QueryStats {
            wall,
            busy,
            parent_records: morsels.iter().map(|m| m.parent_records).sum(),
            morsels,
            morsels_launched: ctx.dispatcher.launched(),
            max_live_morsels: ctx.dispatcher.max_live(),
            peak_budget_bytes: ctx.budget.peak(),
        },
    })
}

/// Scans the active nodes of `fm` once and applies the morsel's edge compute to
/// every outgoing edge.
pub fn extend_frontier(
    g: &CsrGraph,
    sm: &SourceMorsel,
    fm: &FrontierMorsel,
    thread: usize,
) -> Result<()> {
    let iter = fm.epoch + 1;
    match sm.kernel() {
        Kernel::Lengths { frontier, state } => extend_single(g, frontier, state, fm, iter, thread),
        Kernel::Paths { frontier, state } => extend_single(g, frontier, state, fm, iter, thread),
        Kernel::Lanes(lanes) => {
            let mut activated = 0;
            let outcome = lanes.for_each_active(fm, |u, word| {
                for (v, e) in g.scan_fwd(u) {
                    if lanes.ms_edge_compute(word, u, v, e, iter, thread)? == LaneUpdate::Activated
                    {
                        activated += 1;
                    }
                }
                Ok(())
            });
            lanes.add_activations(activated);
            outcome
        }
    }
}

fn extend_single(
    g: &CsrGraph,
    frontier: &FrontierPair,
    compute: &impl EdgeCompute,
    fm: &FrontierMorsel,
    iter: u32,
    thread: usize,
) -> Result<()> {
    let next = frontier.next();
    let mut activated = 0;
    let outcome = frontier.for_each_active(fm, |u| {
        for (v, e) in g.scan_fwd(u) {
            if compute.edge_compute(u, v, e, iter, thread)? && next.try_activate(v) {
                activated += 1;
            }
        }
        Ok(())
    });
    next.add_to_count(activated);
    outcome
}

/// Emits rows for the masked-in, reached destinations in `range`.
fn output_paths(
    sm: &SourceMorsel,
    range: Range<usize>,
    mask: Option<&[bool]>,
    mode: ReturnMode,
    cap: Option<usize>,
    rows: &mut RowBuffer,
) {
    let kernel = sm.kernel();
    for (lane, &source) in sm.sources().iter().enumerate() {
        let dist = |v: NodeId| -> Option<u8> {
            match kernel {
                Kernel::Lengths { state, .. } => state.length(v),
                Kernel::Paths { state, .. } => state.dist(v),
                Kernel::Lanes(lanes) => lanes.length(v, lane),
            }
        };
        let mut cache = HashMap::new();
        for d in range.clone() {
            if mask.is_some_and(|m| !m[d]) {
                continue;
            }
            let destination = NodeId(d as u32);
            let Some(length) = dist(destination) else {
                continue;
            };
            match mode {
                ReturnMode::Lengths => rows.lengths.push(LengthRow {
                    source,
                    destination,
                    length,
                }),
                ReturnMode::Paths => {
                    let parents = kernel.parents().expect("paths query keeps parents");
                    let lane = if sm.is_multi_source() { lane } else { 0 };
                    let enumerator = PathEnumerator {
                        parents,
                        lane,
                        source,
                        dist: &dist,
                        cache: &mut cache,
                        cap: cap.unwrap_or(usize::MAX),
                    };
                    for path in enumerator.run(destination) {
                        rows.paths.push(PathRow {
                            source,
                            destination,
                            path,
                        });
                    }
                }
            }
        }
    }
}

/// Backward depth-first walk over recorded parents, visiting parents in
/// ascending (parent, edge) order so the first paths found are the
/// lexicographically least chains.
struct PathEnumerator<'a, F> {
    parents: &'a ParentStore,
    lane: usize,
    source: NodeId,
    dist: &'a F,
    cache: &'a mut HashMap<NodeId, Vec<(NodeId, EdgeId)>>,
    cap: usize,
}

impl<F: Fn(NodeId) -> Option<u8>> PathEnumerator<'_, F> {
    fn run(mut self, destination: NodeId) -> Vec<Path> {
        let mut out = Vec::new();
        let mut nodes = vec![destination];
        let mut edges = Vec::new();
        self.walk(destination, &mut nodes, &mut edges, &mut out);
        out
    }

    fn parents_of(&mut self, v: NodeId) -> Vec<(NodeId, EdgeId)> {
        let (parents, lane, dist) = (self.parents, self.lane, self.dist);
        self.cache
            .entry(v)
            .or_insert_with(|| match dist(v) {
                Some(d) if d > 0 => parents.collect_parents(v, lane, d as u32),
                _ => Vec::new(),
            })
            .clone()
    }

    fn walk(
        &mut self,
        v: NodeId,
        nodes: &mut Vec<NodeId>,
        edges: &mut Vec<EdgeId>,
        out: &mut Vec<Path>,
    ) {
        if out.len() >= self.cap {
            return;
        }
        if v == self.source {
            out.push(Path {
                nodes: nodes.iter().rev().copied().collect(),
                edges: edges.iter().rev().copied().collect(),
            });
            return;
        }
        for (p, e) in self.parents_of(v) {
            nodes.push(p);
            edges.push(e);
            self.walk(p, nodes, edges, out);
            nodes.pop();
            edges.pop();
            if out.len() >= self.cap {
                return;
            }
        }
    }
}

/// Ground truth from one source: BFS distances and, per node, every parent edge
/// leaving the previous level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SerialIfe {
    pub dist: Vec<Option<u32>>,
    /// Sorted `(parent, edge)` pairs per node.
    pub parents: Vec<Vec<(NodeId, EdgeId)>>,
}

/// Textbook single-threaded IFE from `src`.
pub fn serial_ife_oracle(g: &CsrGraph, src: NodeId) -> SerialIfe {
    let n = g.num_nodes();
    let mut dist = vec![None; n];
    let mut parents = vec![Vec::new(); n];
    dist[src.index()] = Some(0);
    let mut frontier = VecDeque::from([src]);
    while let Some(u) = frontier.pop_front() {
        let du = dist[u.index()].expect("queued nodes are reached");
        for (v, e) in g.scan_fwd(u) {
            match dist[v.index()] {
                None => {
                    dist[v.index()] = Some(du + 1);
                    parents[v.index()].push((u, e));
                    frontier.push_back(v);
                }
                Some(dv) if dv == du + 1 => parents[v.index()].push((u, e)),
                Some(_) => {}
            }
        }
    }
    for p in &mut parents {
        p.sort_unstable();
    }
    SerialIfe { dist, parents }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispatcher::PolicyKind;
    use crate::graph::generate_random_graph;

    fn path_graph() -> CsrGraph {
        CsrGraph::from_arcs(3, &[(0, 1), (1, 2)], true).unwrap()
    }

    fn diamond() -> CsrGraph {
        // s=0, a=1, b=2, t=3
        CsrGraph::from_arcs(4, &[(0, 1), (0, 2), (1, 3), (2, 3)], true).unwrap()
    }

    fn all_policies() -> Vec<DispatchPolicy> {
        vec![
            DispatchPolicy::one_thread_one_source(),
            DispatchPolicy::shared_one_source(),
            DispatchPolicy::shared_k_sources(1),
            DispatchPolicy::shared_k_sources(4),
            DispatchPolicy::shared_k_multi_source(1),
            DispatchPolicy::shared_k_multi_source(2),
        ]
    }

    fn row(s: u32, d: u32, l: u8) -> LengthRow {
        LengthRow {
            source: NodeId(s),
            destination: NodeId(d),
            length: l,
        }
    }

    #[test]
    fn lengths_on_path_graph() {
        let g = path_graph();
        for policy in all_policies() {
            let res = run_query(&QuerySpec::new(&g, vec![NodeId(0)]).policy(policy)).unwrap();
            assert_eq!(
                res.lengths(),
                &[row(0, 0, 0), row(0, 1, 1), row(0, 2, 2)],
                "{policy}"
            );
        }
    }

    #[test]
    fn destination_mask_filters_rows() {
        let g = path_graph();
        for policy in all_policies() {
            let spec = QuerySpec::new(&g, vec![NodeId(0)])
                .policy(policy)
                .destination_list(&[NodeId(2)]);
            assert_eq!(run_query(&spec).unwrap().lengths(), &[row(0, 2, 2)]);
        }
    }

    #[test]
    fn unreachable_destinations_are_skipped() {
        let g = path_graph();
        let res = run_query(&QuerySpec::new(&g, vec![NodeId(2)])).unwrap();
        assert_eq!(res.lengths(), &[row(2, 2, 0)]);
    }

    #[test]
    fn diamond_has_two_shortest_paths() {
        let g = diamond();
        for policy in all_policies() {
            let spec = QuerySpec::new(&g, vec![NodeId(0)])
                .policy(policy)
                .return_mode(ReturnMode::Paths)
                .destination_list(&[NodeId(3)]);
            let res = run_query(&spec).unwrap();
            let paths: Vec<Vec<u32>> = res
                .paths()
                .iter()
                .map(|r| r.path.nodes.iter().map(|n| n.0).collect())
                .collect();
            assert_eq!(paths, vec![vec![0, 1, 3], vec![0, 2, 3]], "{policy}");
            assert!(res
                .paths()
                .iter()
                .all(|r| r.path.len() == 2 && r.path.is_walk_in(&g)));
        }
    }

    #[test]
    fn capped_enumeration_keeps_least_chain() {
        let g = diamond();
        for policy in all_policies() {
            let spec = QuerySpec::new(&g, vec![NodeId(0)])
                .policy(policy)
                .return_mode(ReturnMode::Paths)
                .max_paths(Some(1))
                .destination_list(&[NodeId(3)]);
            let res = run_query(&spec).unwrap();
            assert_eq!(res.paths().len(), 1);
            let p = &res.paths()[0].path;
            assert_eq!(p.nodes, vec![NodeId(0), NodeId(1), NodeId(3)]);
            assert_eq!(p.to_sequence(), vec![0, 0, 1, 2, 3]);
        }
    }

    #[test]
    fn source_row_is_the_empty_path() {
        let g = diamond();
        let spec = QuerySpec::new(&g, vec![NodeId(0)])
            .return_mode(ReturnMode::Paths)
            .destination_list(&[NodeId(0)]);
        let res = run_query(&spec).unwrap();
        assert_eq!(res.paths().len(), 1);
        assert!(res.paths()[0].path.is_empty());
        assert_eq!(res.paths()[0].path.nodes, vec![NodeId(0)]);
    }

    #[test]
    fn serial_oracle_examples() {
        let isolated = CsrGraph::from_arcs(3, &[(1, 2)], true).unwrap();
        let r = serial_ife_oracle(&isolated, NodeId(0));
        assert_eq!(r.dist, vec![Some(0), None, None]);

        let cycle = crate::graph::load_edge_list(
            "0 1\n1 2\n2 3\n3 0\n".as_bytes(),
            crate::graph::LoadOptions::directed(false),
        )
        .unwrap();
        let r = serial_ife_oracle(&cycle, NodeId(0));
        assert_eq!(r.dist, vec![Some(0), Some(1), Some(2), Some(1)]);
        assert_eq!(r.parents[2].len(), 2);
    }

    #[test]
    fn engine_matches_serial_oracle() {
        let g = generate_random_graph(200, 4.0, 7).unwrap();
        let sources: Vec<NodeId> = (0..20).map(|i| NodeId(i * 9)).collect();
        for policy in all_policies() {
            for threads in [1, 3] {
                let spec = QuerySpec::new(&g, sources.clone())
                    .policy(policy)
                    .threads(threads)
                    .morsel_sizes(MorselSizes::uniform(16));
                let res = run_query(&spec).unwrap();
                let mut want = Vec::new();
                for &s in &sources {
                    let oracle = serial_ife_oracle(&g, s);
                    for (d, dist) in oracle.dist.iter().enumerate() {
                        if let Some(l) = dist {
                            want.push(row(s.0, d as u32, *l as u8));
                        }
                    }
                }
                want.sort_unstable();
                assert_eq!(res.lengths(), want.as_slice(), "{policy} x{threads}");
            }
        }
    }

    #[test]
    fn level_stats_cover_reached_nodes() {
        let g = generate_random_graph(500, 3.0, 3).unwrap();
        let spec = QuerySpec::new(&g, vec![NodeId(5)])
            .policy(DispatchPolicy::shared_one_source())
            .threads(2)
            .morsel_sizes(MorselSizes::uniform(32));
        let res = run_query(&spec).unwrap();
        let levels = &res.stats.morsels[0].levels;
        let total: usize = levels.iter().map(|l| l.frontier_size).sum();
        assert_eq!(total, res.lengths().len());
        assert_eq!(levels[0].frontier_size, 1);
        assert!(levels.iter().enumerate().all(|(i, l)| l.level == i as u32));
    }

    #[test]
    fn utilization_is_a_fraction() {
        let g = generate_random_graph(2000, 4.0, 1).unwrap();
        let sources: Vec<NodeId> = (0..8).map(NodeId).collect();
        let res = run_query(&QuerySpec::new(&g, sources).threads(4)).unwrap();
        let u = res.stats.utilization();
        assert!((0.0..=1.0).contains(&u), "{u}");
        assert_eq!(res.stats.busy.len(), 4);
    }

    #[test]
    fn depth_overflow_aborts_the_query() {
        let n = 300u32;
        let arcs: Vec<(u32, u32)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        let g = CsrGraph::from_arcs(n as usize, &arcs, true).unwrap();
        for policy in all_policies() {
            for mode in [ReturnMode::Lengths, ReturnMode::Paths] {
                let spec = QuerySpec::new(&g, vec![NodeId(0)])
                    .policy(policy)
                    .return_mode(mode)
                    .threads(2);
                let err = run_query(&spec).unwrap_err();
                assert!(
                    matches!(
                        err,
                        Error::DepthOverflow {
                            depth: 255,
                            max: 254
                        }
                    ),
                    "{err}"
                );
            }
        }
        // 254 edges deep still fits.
        let spec = QuerySpec::new(&g, vec![NodeId(45)]);
        let res = run_query(&spec).unwrap();
        assert_eq!(res.lengths().last().unwrap().length, 254);
    }

    #[test]
    fn lane_budget_exhaustion_is_reported() {
        let g = generate_random_graph(1000, 2.0, 2).unwrap();
        let spec = QuerySpec::new(&g, vec![NodeId(0), NodeId(1)])
            .policy(DispatchPolicy::shared_k_multi_source(1))
            .return_mode(ReturnMode::Paths)
            .memory_limit(Some(1000 * 536 - 1));
        assert!(matches!(run_query(&spec), Err(Error::OutOfMemory { .. })));
    }

    #[test]
    fn retired_lane_memory_is_reused() {
        let g = generate_random_graph(1000, 2.0, 2).unwrap();
        let sources: Vec<NodeId> = (0..200).map(NodeId).collect();
        let spec = QuerySpec::new(&g, sources)
            .policy(DispatchPolicy::shared_k_multi_source(1))
            .threads(4)
            .memory_limit(Some(1000 * 88));
        let res = run_query(&spec).unwrap();
        assert_eq!(res.stats.morsels_launched, 4);
        assert_eq!(res.stats.peak_budget_bytes, 1000 * 88);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let g = path_graph();
        assert!(run_query(&QuerySpec::new(&g, vec![NodeId(3)])).is_err());
        assert!(run_query(&QuerySpec::new(&g, vec![NodeId(0)]).threads(0)).is_err());
        assert!(
            run_query(&QuerySpec::new(&g, vec![NodeId(0)]).destinations(Some(vec![true]))).is_err()
        );
        assert!(DispatchPolicy::new(PolicyKind::SharedKSources, Some(0)).is_err());
    }

    #[test]
    fn empty_source_list_yields_nothing() {
        let g = path_graph();
        for policy in all_policies() {
            let res = run_query(&QuerySpec::new(&g, Vec::new()).policy(policy).threads(2)).unwrap();
            assert!(res.rows.is_empty());
        }
    }
}
