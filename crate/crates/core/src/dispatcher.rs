//! Source-morsel lifecycle and the four dispatching policies.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::atomic::{AtomicU32, AtomicU8, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use crate::algorithms::{LaneState, LengthState, PathState, ReturnMode, LANES};
use crate::error::{Error, Result};
use crate::frontier::{FrontierMorsel, FrontierPair, MorselSizes, SwapOutcome};
use crate::graph::NodeId;
use crate::memory::MemoryBudget;
use crate::parents::ParentStore;

pub const DEFAULT_OUTPUT_CHUNK: usize = 4096;
pub const DEFAULT_K_SOURCES: usize = 32;
pub const DEFAULT_K_MULTI_SOURCE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    /// 1T1S: each worker runs its own sources start to finish.
    OneThreadOneSource,
    /// nT1S: every worker cooperates on a single source at a time.
    SharedOneSource,
    /// nTkS: every worker cooperates on up to `k` sources at a time.
    SharedKSources,
    /// nTkMS: like nTkS with 64-source multi-source morsels.
    SharedKMultiSource,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::OneThreadOneSource,
        PolicyKind::SharedOneSource,
        PolicyKind::SharedKSources,
        PolicyKind::SharedKMultiSource,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::OneThreadOneSource => "1t1s",
            PolicyKind::SharedOneSource => "nt1s",
            PolicyKind::SharedKSources => "ntks",
            PolicyKind::SharedKMultiSource => "ntkms",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidQuery(format!("unknown policy `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DispatchPolicy {
    pub kind: PolicyKind,
    /// Concurrent source morsels; only meaningful for nTkS and nTkMS.
    pub k: usize,
}

impl DispatchPolicy {
    pub fn one_thread_one_source() -> Self {
        Self {
            kind: PolicyKind::OneThreadOneSource,
            k: 1,
        }
    }

    pub fn shared_one_source() -> Self {
        Self {
            kind: PolicyKind::SharedOneSource,
            k: 1,
        }
    }

    pub fn shared_k_sources(k: usize) -> Self {
        Self {
            kind: PolicyKind::SharedKSources,
            k,
        }
    }

    pub fn shared_k_multi_source(k: usize) -> Self {
        Self {
            kind: PolicyKind::SharedKMultiSource,
            k,
        }
    }

    /// Builds a policy with `k` defaulting per kind.
    pub fn new(kind: PolicyKind, k: Option<usize>) -> Result<Self> {
        let k = match kind {
            PolicyKind::OneThreadOneSource | PolicyKind::SharedOneSource => 1,
            PolicyKind::SharedKSources => k.unwrap_or(DEFAULT_K_SOURCES),
            PolicyKind::SharedKMultiSource => k.unwrap_or(DEFAULT_K_MULTI_SOURCE),
        };
        if k == 0 {
            return Err(Error::InvalidQuery("k must be at least 1".into()));
        }
        Ok(Self { kind, k })
    }

    /// Most morsels that may be live at once.
    pub fn live_limit(&self, num_threads: usize) -> usize {
        match self.kind {
            PolicyKind::OneThreadOneSource => num_threads,
            PolicyKind::SharedOneSource => 1,
            PolicyKind::SharedKSources | PolicyKind::SharedKMultiSource => self.k,
        }
    }

    pub fn sources_per_morsel(&self) -> usize {
        match self.kind {
            PolicyKind::SharedKMultiSource => LANES,
            _ => 1,
        }
    }

    /// Whether idle workers may join morsels launched by others.
    pub fn shares_morsels(&self) -> bool {
        self.kind != PolicyKind::OneThreadOneSource
    }
}

impl fmt::Display for DispatchPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            PolicyKind::SharedKSources | PolicyKind::SharedKMultiSource => {
                write!(f, "{}(k={})", self.kind, self.k)
            }
            _ => write!(f, "{}", self.kind),
        }
    }
}

/// Query sources, consumed front to back exactly once.
#[derive(Debug)]
pub struct SourceTable {
    sources: Vec<NodeId>,
    cursor: AtomicUsize,
}

impl SourceTable {
    pub fn new(sources: Vec<NodeId>) -> Self {
        Self {
            sources,
            cursor: AtomicUsize::new(0),
        }
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn is_exhausted(&self) -> bool {
        self.cursor.load(Ordering::Relaxed) >= self.sources.len()
    }

    /// Takes the next `max` (or fewer) sources.
    pub fn claim(&self, max: usize) -> Option<&[NodeId]> {
        let len = self.sources.len();
        let mut cur = self.cursor.load(Ordering::Relaxed);
        loop {
            if cur >= len {
                return None;
            }
            let end = (cur + max).min(len);
            match self
                .cursor
                .compare_exchange_weak(cur, end, Ordering::Relaxed, Ordering::Relaxed)
            {
                Ok(_) => return Some(&self.sources[cur..end]),
                Err(observed) => cur = observed,
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    FrontierExtension,
    Output,
    Retired,
}

const PHASE_EXTENSION: u8 = 0;
const PHASE_OUTPUT: u8 = 1;
const PHASE_RETIRED: u8 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryAction {
    None,
    Advanced,
    EnteredOutput,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LevelStat {
    pub level: u32,
    /// Nodes active at this level (nodes with any active lane for multi-source).
    pub frontier_size: usize,
    pub elapsed: Duration,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MorselStats {
    pub id: usize,
    pub sources: Vec<NodeId>,
    pub levels: Vec<LevelStat>,
    pub parent_records: usize,
}

/// Per-morsel search state, one variant per algorithm.
#[derive(Debug)]
pub enum Kernel {
    Lengths {
        frontier: FrontierPair,
        state: LengthState,
    },
    Paths {
        frontier: FrontierPair,
        state: PathState,
    },
    Lanes(LaneState),
}

impl Kernel {
    fn has_frontier_work(&self) -> bool {
        match self {
            Kernel::Lengths { frontier, .. } | Kernel::Paths { frontier, .. } => {
                frontier.has_work()
            }
            Kernel::Lanes(lanes) => lanes.has_work(),
        }
    }

    fn grab_frontier_morsel(&self) -> Option<FrontierMorsel> {
        match self {
            Kernel::Lengths { frontier, .. } | Kernel::Paths { frontier, .. } => {
                frontier.grab_frontier_morsel()
            }
            Kernel::Lanes(lanes) => lanes.grab_frontier_morsel(),
        }
    }

    fn complete_morsel(&self, fm: &FrontierMorsel) -> bool {
        match self {
            Kernel::Lengths { frontier, .. } | Kernel::Paths { frontier, .. } => {
                frontier.complete_morsel(fm)
            }
            Kernel::Lanes(lanes) => lanes.complete_morsel(fm),
        }
    }

    fn next_count(&self) -> usize {
        match self {
            Kernel::Lengths { frontier, .. } | Kernel::Paths { frontier, .. } => {
                frontier.next().active_count()
            }
            Kernel::Lanes(lanes) => lanes.next_count(),
        }
    }

    fn start(&self) -> SwapOutcome {
        match self {
            Kernel::Lengths { frontier, .. } | Kernel::Paths { frontier, .. } => frontier.start(),
            Kernel::Lanes(lanes) => lanes.start(),
        }
    }

    fn swap(&self) -> SwapOutcome {
        match self {
            Kernel::Lengths { frontier, .. } | Kernel::Paths { frontier, .. } => {
                frontier.swap_and_maybe_sparsify()
            }
            Kernel::Lanes(lanes) => lanes.swap(),
        }
    }

    pub fn parents(&self) -> Option<&ParentStore> {
        match self {
            Kernel::Lengths { .. } => None,
            Kernel::Paths { state, .. } => Some(state.parents()),
            Kernel::Lanes(lanes) => lanes.parents(),
        }
    }
}

#[derive(Debug)]
struct LevelClock {
    started: Instant,
    frontier_size: usize,
    levels: Vec<LevelStat>,
}

/// One IFE subroutine (or up to 64 of them sharing scans) and its lifecycle.
#[derive(Debug)]
pub struct SourceMorsel {
    id: usize,
    sources: Vec<NodeId>,
    kernel: Kernel,
    num_nodes: usize,
    phase: AtomicU8,
    cur_iter: AtomicU32,
    output_cursor: AtomicUsize,
    output_done: AtomicUsize,
    output_chunk: usize,
    clock: Mutex<LevelClock>,
    retired_alive: Arc<AtomicUsize>,
}

impl SourceMorsel {
    fn new(
        id: usize,
        sources: Vec<NodeId>,
        kernel: Kernel,
        num_nodes: usize,
        output_chunk: usize,
        retired_alive: Arc<AtomicUsize>,
    ) -> Self {
        let frontier_size = match &kernel {
            Kernel::Lengths { frontier, .. } | Kernel::Paths { frontier, .. } => {
                frontier.current().active_count()
            }
            Kernel::Lanes(lanes) => lanes.active_count(),
        };
        let morsel = Self {
            id,
            sources,
            kernel,
            num_nodes,
            phase: AtomicU8::new(PHASE_EXTENSION),
            cur_iter: AtomicU32::new(0),
            output_cursor: AtomicUsize::new(0),
            output_done: AtomicUsize::new(0),
            output_chunk: output_chunk.max(1),
            clock: Mutex::new(LevelClock {
                started: Instant::now(),
                frontier_size,
                levels: Vec::new(),
            }),
            retired_alive,
        };
        // Sources are always active, so the first iteration never converges.
        let outcome = morsel.kernel.start();
        debug_assert_eq!(outcome, SwapOutcome::Continue);
        morsel
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn sources(&self) -> &[NodeId] {
        &self.sources
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn is_multi_source(&self) -> bool {
        matches!(self.kernel, Kernel::Lanes(_))
    }

    pub fn phase(&self) -> Phase {
        match self.phase.load(Ordering::Acquire) {
            PHASE_EXTENSION => Phase::FrontierExtension,
            PHASE_OUTPUT => Phase::Output,
            _ => Phase::Retired,
        }
    }

    /// Iterations completed so far.
    pub fn cur_iter(&self) -> u32 {
        self.cur_iter.load(Ordering::Relaxed)
    }

    /// Whether a frontier or output morsel could be grabbed right now.
    pub fn can_yield_work(&self) -> bool {
        match self.phase() {
            Phase::FrontierExtension => self.kernel.has_frontier_work(),
            Phase::Output => self.output_cursor.load(Ordering::Relaxed) < self.num_nodes,
            Phase::Retired => false,
        }
    }

    pub fn grab_frontier_morsel(&self) -> Option<FrontierMorsel> {
        if self.phase() != Phase::FrontierExtension {
            return None;
        }
        self.kernel.grab_frontier_morsel()
    }

    /// Completes `fm`; the caller that finished the iteration performs the
    /// boundary and learns what happened.
    pub fn check_if_frontier_finished(&self, fm: &FrontierMorsel) -> BoundaryAction {
        if !self.kernel.complete_morsel(fm) {
            return BoundaryAction::None;
        }
        let next_size = self.kernel.next_count();
        {
            let mut clock = self.clock.lock().expect("level clock poisoned");
            let now = Instant::now();
            let stat = LevelStat {
                level: self.cur_iter(),
                frontier_size: clock.frontier_size,
                elapsed: now - clock.started,
            };
            clock.levels.push(stat);
            clock.started = now;
            clock.frontier_size = next_size;
        }
        match self.kernel.swap() {
            SwapOutcome::Continue => {
                self.cur_iter.fetch_add(1, Ordering::Relaxed);
                BoundaryAction::Advanced
            }
            SwapOutcome::Converged => {
                if let Some(parents) = self.kernel.parents() {
                    parents.freeze();
                }
                self.phase.store(PHASE_OUTPUT, Ordering::Release);
                BoundaryAction::EnteredOutput
            }
        }
    }

    /// Next range of destination ids to emit.
    pub fn grab_output_morsel(&self) -> Option<Range<usize>> {
        if self.phase() != Phase::Output
            || self.output_cursor.load(Ordering::Relaxed) >= self.num_nodes
        {
            return None;
        }
        let begin = self
            .output_cursor
            .fetch_add(self.output_chunk, Ordering::Relaxed);
        (begin < self.num_nodes).then(|| begin..(begin + self.output_chunk).min(self.num_nodes))
    }

    pub fn stats(&self) -> MorselStats {
        MorselStats {
            id: self.id,
            sources: self.sources.clone(),
            levels: self
                .clock
                .lock()
                .expect("level clock poisoned")
                .levels
                .clone(),
            parent_records: self.kernel.parents().map_or(0, ParentStore::num_records),
        }
    }
}

impl Drop for SourceMorsel {
    fn drop(&mut self) {
        if *self.phase.get_mut() == PHASE_RETIRED {
            self.retired_alive.fetch_sub(1, Ordering::Relaxed);
        }
    }
}

/// How a worker obtained the morsel it should work on next.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Acquired {
    /// Kept its previous morsel.
    Kept,
    Launched,
    /// Joined a live morsel launched by someone else.
    Joined,
}

#[derive(Debug)]
pub enum Grab {
    Morsel(Arc<SourceMorsel>, Acquired),
    /// Sources remain or morsels are live, but none has work right now.
    Wait,
    Exhausted,
}

/// Settings shared by all morsels of a query.
#[derive(Clone, Debug)]
pub struct MorselConfig {
    pub num_nodes: usize,
    pub mode: ReturnMode,
    pub num_threads: usize,
    pub sizes: MorselSizes,
    pub output_chunk: usize,
    pub budget: Arc<MemoryBudget>,
}

enum Launch {
    Launched(Arc<SourceMorsel>),
    Blocked,
    NotAllowed,
}

/// Shared dispatcher state of one query.
#[derive(Debug)]
pub struct Dispatcher {
    policy: DispatchPolicy,
    config: MorselConfig,
    table: SourceTable,
    live: Mutex<Vec<Arc<SourceMorsel>>>,
    live_count: AtomicUsize,
    max_live: AtomicUsize,
    launched: AtomicUsize,
    next_id: AtomicUsize,
    retired_alive: Arc<AtomicUsize>,
    finished: Mutex<Vec<MorselStats>>,
}

impl Dispatcher {
    pub fn new(policy: DispatchPolicy, config: MorselConfig, sources: Vec<NodeId>) -> Self {
        Self {
            policy,
            config,
            table: SourceTable::new(sources),
            live: Mutex::new(Vec::new()),
            live_count: AtomicUsize::new(0),
            max_live: AtomicUsize::new(0),
            launched: AtomicUsize::new(0),
            next_id: AtomicUsize::new(0),
            retired_alive: Arc::new(AtomicUsize::new(0)),
            finished: Mutex::new(Vec::new()),
        }
    }

    pub fn policy(&self) -> DispatchPolicy {
        self.policy
    }

    pub fn config(&self) -> &MorselConfig {
        &self.config
    }

    pub fn launched(&self) -> usize {
        self.launched.load(Ordering::Relaxed)
    }

    /// High-water mark of simultaneously live morsels.
    pub fn max_live(&self) -> usize {
        self.max_live.load(Ordering::Relaxed)
    }

    pub fn live_count(&self) -> usize {
        self.live_count.load(Ordering::Relaxed)
    }

    /// Stats of retired morsels, by morsel id.
    pub fn finished(&self) -> Vec<MorselStats> {
        let mut out = self.finished.lock().expect("dispatcher poisoned").clone();
        out.sort_by_key(|m| m.id);
        out
    }

    /// Picks the morsel a worker should work on. `current` is the worker's
    /// previous morsel and is replaced by the returned one.
    pub fn grab_src_morsel_if_necessary(
        &self,
        current: &mut Option<Arc<SourceMorsel>>,
    ) -> Result<Grab> {
        if let Some(m) = current.as_ref() {
            if m.can_yield_work() {
                return Ok(Grab::Morsel(Arc::clone(m), Acquired::Kept));
            }
        }
        let previous = current.take().map(|m| m.id);
        match self.try_launch()? {
            Launch::Launched(m) => {
                *current = Some(Arc::clone(&m));
                return Ok(Grab::Morsel(m, Acquired::Launched));
            }
            Launch::Blocked => return Ok(Grab::Wait),
            Launch::NotAllowed => {}
        }
        if self.policy.shares_morsels() {
            if let Some(m) = self.find_live_work(previous) {
                *current = Some(Arc::clone(&m));
                return Ok(Grab::Morsel(m, Acquired::Joined));
            }
        }
        let done = self.table.is_exhausted()
            && (!self.policy.shares_morsels() || self.live_count.load(Ordering::Acquire) == 0);
        Ok(if done { Grab::Exhausted } else { Grab::Wait })
    }

    fn try_launch(&self) -> Result<Launch> {
        if self.table.is_exhausted() {
            return Ok(Launch::NotAllowed);
        }
        let limit = self.policy.live_limit(self.config.num_threads);
        let mut live = self.live_count.load(Ordering::Relaxed);
        loop {
            if live >= limit {
                return Ok(Launch::NotAllowed);
            }
            match self.live_count.compare_exchange_weak(
                live,
                live + 1,
                Ordering::AcqRel,
                Ordering::Relaxed,
            ) {
                Ok(_) => break,
                Err(observed) => live = observed,
            }
        }
        self.max_live.fetch_max(live + 1, Ordering::Relaxed);
        match self.build_morsel() {
            Ok(Some(m)) => {
                self.launched.fetch_add(1, Ordering::Relaxed);
                self.live
                    .lock()
                    .expect("dispatcher poisoned")
                    .push(Arc::clone(&m));
                Ok(Launch::Launched(m))
            }
            Ok(None) => {
                self.live_count.fetch_sub(1, Ordering::AcqRel);
                Ok(Launch::NotAllowed)
            }
            Err(Error::OutOfMemory { .. }) if self.retired_alive.load(Ordering::Relaxed) > 0 => {
                // A retired morsel still held by some worker will free its
                // memory shortly.
                self.live_count.fetch_sub(1, Ordering::AcqRel);
                Ok(Launch::Blocked)
            }
            Err(e) => {
                self.live_count.fetch_sub(1, Ordering::AcqRel);
                Err(e)
            }
        }
    }

    fn build_morsel(&self) -> Result<Option<Arc<SourceMorsel>>> {
        let cfg = &self.config;
        let n = cfg.num_nodes;
        let lane_reservation = if self.policy.kind == PolicyKind::SharedKMultiSource {
            Some(cfg.budget.try_reserve(n * cfg.mode.bytes_per_node())?)
        } else {
            None
        };
        let Some(sources) = self.table.claim(self.policy.sources_per_morsel()) else {
            return Ok(None);
        };
        let kernel = match lane_reservation {
            Some(reservation) => Kernel::Lanes(LaneState::with_reservation(
                n,
                sources,
                cfg.mode,
                cfg.num_threads,
                cfg.sizes.dense,
                Arc::clone(&cfg.budget),
                reservation,
            )),
            None => {
                let src = sources[0];
                let frontier = FrontierPair::new(n, cfg.sizes);
                frontier.seed(src);
                match cfg.mode {
                    ReturnMode::Lengths => Kernel::Lengths {
                        frontier,
                        state: LengthState::new(n, src),
                    },
                    ReturnMode::Paths => Kernel::Paths {
                        frontier,
                        state: PathState::new(n, src, cfg.num_threads, Arc::clone(&cfg.budget)),
                    },
                }
            }
        };
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        Ok(Some(Arc::new(SourceMorsel::new(
            id,
            sources.to_vec(),
            kernel,
            n,
            cfg.output_chunk,
            Arc::clone(&self.retired_alive),
        ))))
    }

    /// Round-robin over live morsels, starting after the worker's previous one.
    fn find_live_work(&self, previous: Option<usize>) -> Option<Arc<SourceMorsel>> {
        let live = self.live.lock().expect("dispatcher poisoned");
        // Ids greater than `previous` come first, then the rest, each ascending.
        let after = |m: &&Arc<SourceMorsel>| (previous.is_some_and(|p| m.id <= p), m.id);
        live.iter()
            .filter(|m| m.can_yield_work())
            .min_by_key(after)
            .cloned()
    }

    /// Marks `range` of `sm`'s output emitted; the call that finishes the last
    /// range retires the morsel and returns true.
    pub fn complete_output(&self, sm: &Arc<SourceMorsel>, range: Range<usize>) -> bool {
        let done = sm.output_done.fetch_add(range.len(), Ordering::AcqRel) + range.len();
        if done < sm.num_nodes {
            return false;
        }
        self.retire(sm);
        true
    }

    fn retire(&self, sm: &Arc<SourceMorsel>) {
        sm.phase.store(PHASE_RETIRED, Ordering::Release);
        self.retired_alive.fetch_add(1, Ordering::Relaxed);
        self.finished
            .lock()
            .expect("dispatcher poisoned")
            .push(sm.stats());
        let mut live = self.live.lock().expect("dispatcher poisoned");
        if let Some(pos) = live.iter().position(|m| m.id == sm.id) {
            live.remove(pos);
        }
        drop(live);
        self.live_count.fetch_sub(1, Ordering::AcqRel);
    }
}
