//! Edge-compute kernels for shortest-path lengths and all shortest paths, in
//! single-source form and in the 64-lane multi-source form.

use std::fmt;
use std::mem::size_of;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, AtomicU8, AtomicUsize, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::frontier::{FrontierMorsel, MorselCarver, MorselKind, SwapOutcome};
use crate::graph::{EdgeId, NodeId};
use crate::memory::{MemoryBudget, Reservation};
use crate::parents::ParentStore;

/// One-byte length sentinel for nodes not reached yet.
pub const UNREACHED: u8 = u8::MAX;
/// Deepest level representable in the one-byte length encoding.
pub const MAX_DEPTH: u32 = 254;
/// Sources per multi-source morsel.
pub const LANES: usize = 64;

#[inline]
fn check_depth(iter: u32) -> Result<()> {
    if iter > MAX_DEPTH {
        return Err(Error::DepthOverflow {
            depth: iter,
            max: MAX_DEPTH,
        });
    }
    Ok(())
}

/// Per-edge callback of a single-source search. Returns whether `v` must enter
/// the next frontier.
pub trait EdgeCompute: Sync {
    fn edge_compute(
        &self,
        u: NodeId,
        v: NodeId,
        via: EdgeId,
        iter: u32,
        thread: usize,
    ) -> Result<bool>;
}

/// Shortest-path lengths from one source.
#[derive(Debug)]
pub struct LengthState {
    len: Box<[AtomicU8]>,
    visited: Box<[AtomicBool]>,
}

impl LengthState {
    pub fn new(num_nodes: usize, source: NodeId) -> Self {
        let st = Self {
            len: (0..num_nodes).map(|_| AtomicU8::new(UNREACHED)).collect(),
            visited: (0..num_nodes).map(|_| AtomicBool::new(false)).collect(),
        };
        st.len[source.index()].store(0, Ordering::Relaxed);
        st.visited[source.index()].store(true, Ordering::Relaxed);
        st
    }

    pub fn length(&self, v: NodeId) -> Option<u8> {
        match self.len[v.index()].load(Ordering::Relaxed) {
            UNREACHED => None,
            l => Some(l),
        }
    }

    /// Assigns `len[v] = iter` the first time `v` is reached.
    #[inline]
    pub fn edge_compute_lengths(&self, _u: NodeId, v: NodeId, iter: u32) -> Result<bool> {
        let seen = &self.visited[v.index()];
        if seen.load(Ordering::Relaxed) || seen.swap(true, Ordering::Relaxed) {
            return Ok(false);
        }
        check_depth(iter)?;
        self.len[v.index()].store(iter as u8, Ordering::Relaxed);
        Ok(true)
    }

    pub fn preallocated_bytes(&self) -> usize {
        self.len.len() * size_of::<AtomicU8>() + self.visited.len() * size_of::<AtomicBool>()
    }
}

impl EdgeCompute for LengthState {
    #[inline]
    fn edge_compute(
        &self,
        u: NodeId,
        v: NodeId,
        _via: EdgeId,
        iter: u32,
        _thread: usize,
    ) -> Result<bool> {
        self.edge_compute_lengths(u, v, iter)
    }
}

/// All shortest paths from one source, kept as parent chains.
///
/// A parent edge `(u, v)` is recorded whenever `v` was not reached at an earlier
/// level, so every same-level parent of `v` ends up on its chain.
#[derive(Debug)]
pub struct PathState {
    visited: Box<[AtomicBool]>,
    dist: Box<[AtomicU8]>,
    parents: ParentStore,
}

impl PathState {
    pub fn new(
        num_nodes: usize,
        source: NodeId,
        num_threads: usize,
        budget: Arc<MemoryBudget>,
    ) -> Self {
        let st = Self {
            visited: (0..num_nodes).map(|_| AtomicBool::new(false)).collect(),
            dist: (0..num_nodes).map(|_| AtomicU8::new(UNREACHED)).collect(),
            parents: ParentStore::with_lanes(num_nodes, 1, num_threads, budget),
        };
        st.dist[source.index()].store(0, Ordering::Relaxed);
        st.visited[source.index()].store(true, Ordering::Relaxed);
        st
    }

    pub fn dist(&self, v: NodeId) -> Option<u8> {
        match self.dist[v.index()].load(Ordering::Relaxed) {
            UNREACHED => None,
            d => Some(d),
        }
    }

    pub fn parents(&self) -> &ParentStore {
        &self.parents
    }

    pub fn edge_compute_paths(
        &self,
        u: NodeId,
        v: NodeId,
        via: EdgeId,
        iter: u32,
        thread: usize,
    ) -> Result<bool> {
        let i = v.index();
        // Levels below `iter` were settled before this iteration started.
        let d = self.dist[i].load(Ordering::Acquire);
        if d != UNREACHED && d as u32 != iter {
            return Ok(false);
        }
        check_depth(iter)?;
        self.parents.add_parent_edge(v, 0, u, via, iter, thread)?;
        if d == UNREACHED {
            let _ = self.dist[i].compare_exchange(
                UNREACHED,
                iter as u8,
                Ordering::Relaxed,
                Ordering::Relaxed,
            );
        }
        self.visited[i].store(true, Ordering::Release);
        Ok(true)
    }

    pub fn preallocated_bytes(&self) -> usize {
        self.visited.len() * size_of::<AtomicBool>()
            + self.dist.len() * size_of::<AtomicU8>()
            + self.parents.head_bytes()
    }
}

impl EdgeCompute for PathState {
    #[inline]
    fn edge_compute(
        &self,
        u: NodeId,
        v: NodeId,
        via: EdgeId,
        iter: u32,
        thread: usize,
    ) -> Result<bool> {
        self.edge_compute_paths(u, v, via, iter, thread)
    }
}

/// Indices of the 1-bits of `word`, ascending.
pub fn decode_set_bits(word: u64) -> Vec<usize> {
    SetBits(word).collect()
}

/// Iterates set bit positions by repeated find-first-set and clear-lowest.
#[derive(Clone, Copy, Debug)]
pub struct SetBits(pub u64);

impl Iterator for SetBits {
    type Item = usize;

    #[inline(always)]
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

/// What a query returns per (source, destination) pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ReturnMode {
    #[default]
    Lengths,
    Paths,
}

impl fmt::Display for ReturnMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReturnMode::Lengths => "lengths",
            ReturnMode::Paths => "paths",
        })
    }
}

impl FromStr for ReturnMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lengths" => Ok(ReturnMode::Lengths),
            "paths" => Ok(ReturnMode::Paths),
            other => Err(Error::InvalidQuery(format!(
                "unknown return mode `{other}`"
            ))),
        }
    }
}

impl ReturnMode {
    /// Pre-allocated bytes per graph node for one multi-source morsel.
    pub const fn bytes_per_node(self) -> usize {
        let bit_arrays = 3 * size_of::<u64>();
        match self {
            ReturnMode::Lengths => bit_arrays + LANES * size_of::<u8>(),
            ReturnMode::Paths => bit_arrays + LANES * size_of::<u64>(),
        }
    }
}

#[derive(Debug)]
enum LaneAux {
    Lengths(Box<[AtomicU8]>),
    Paths(ParentStore),
}

/// Outcome of one multi-source edge relaxation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LaneUpdate {
    Unchanged,
    /// New lanes were added to a node already in the next frontier.
    Extended,
    /// The node entered the next frontier.
    Activated,
}

/// State of up to 64 concurrent searches sharing neighbor scans. Bit `i` of each
/// per-node word belongs to `sources[i]`.
#[derive(Debug)]
pub struct LaneState {
    sources: Vec<NodeId>,
    bits: [Box<[AtomicU64]>; 2],
    visited: Box<[AtomicU64]>,
    counts: [AtomicUsize; 2],
    epoch: AtomicU32,
    carver: MorselCarver,
    morsel_size: usize,
    aux: LaneAux,
    _reservation: Reservation,
}

impl LaneState {
    pub fn new(
        num_nodes: usize,
        sources: &[NodeId],
        mode: ReturnMode,
        num_threads: usize,
        morsel_size: usize,
        budget: Arc<MemoryBudget>,
    ) -> Result<Self> {
        let reservation = budget.try_reserve(num_nodes * mode.bytes_per_node())?;
        Ok(Self::with_reservation(
            num_nodes,
            sources,
            mode,
            num_threads,
            morsel_size,
            budget,
            reservation,
        ))
    }

    /// Builds the state against bytes already reserved by the caller.
    pub fn with_reservation(
        num_nodes: usize,
        sources: &[NodeId],
        mode: ReturnMode,
        num_threads: usize,
        morsel_size: usize,
        budget: Arc<MemoryBudget>,
        reservation: Reservation,
    ) -> Self {
        assert!(!sources.is_empty() && sources.len() <= LANES);
        let words = || -> Box<[AtomicU64]> { (0..num_nodes).map(|_| AtomicU64::new(0)).collect() };
        let aux = match mode {
            ReturnMode::Lengths => LaneAux::Lengths(
                (0..num_nodes * LANES)
                    .map(|_| AtomicU8::new(UNREACHED))
                    .collect(),
            ),
            ReturnMode::Paths => LaneAux::Paths(ParentStore::with_lanes(
                num_nodes,
                LANES,
                num_threads,
                budget,
            )),
        };
        let st = Self {
            sources: sources.to_vec(),
            bits: [words(), words()],
            visited: words(),
            counts: [AtomicUsize::new(0), AtomicUsize::new(0)],
            epoch: AtomicU32::new(0),
            carver: MorselCarver::new(),
            morsel_size,
            aux,
            _reservation: reservation,
        };
        for (lane, &s) in sources.iter().enumerate() {
            let bit = 1u64 << lane;
            if st.bits[0][s.index()].fetch_or(bit, Ordering::Relaxed) == 0 {
                st.counts[0].fetch_add(1, Ordering::Relaxed);
            }
            st.visited[s.index()].fetch_or(bit, Ordering::Relaxed);
            if let LaneAux::Lengths(len) = &st.aux {
                len[s.index() * LANES + lane].store(0, Ordering::Relaxed);
            }
        }
        st
    }

    pub fn sources(&self) -> &[NodeId] {
        &self.sources
    }

    pub fn mode(&self) -> ReturnMode {
        match self.aux {
            LaneAux::Lengths(_) => ReturnMode::Lengths,
            LaneAux::Paths(_) => ReturnMode::Paths,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.visited.len()
    }

    /// Bytes allocated up front for the bit arrays and per-lane auxiliaries.
    pub fn preallocated_bytes(&self) -> usize {
        let words = self.bits[0].len() + self.bits[1].len() + self.visited.len();
        let aux = match &self.aux {
            LaneAux::Lengths(len) => len.len() * size_of::<AtomicU8>(),
            LaneAux::Paths(p) => p.head_bytes(),
        };
        words * size_of::<AtomicU64>() + aux
    }

    pub fn epoch(&self) -> u32 {
        self.epoch.load(Ordering::Relaxed)
    }

    fn current_bits(&self) -> &[AtomicU64] {
        &self.bits[(self.epoch() & 1) as usize]
    }

    fn next_bits(&self) -> &[AtomicU64] {
        &self.bits[((self.epoch() + 1) & 1) as usize]
    }

    pub fn frontier_word(&self, v: NodeId) -> u64 {
        self.current_bits()[v.index()].load(Ordering::Relaxed)
    }

    pub fn next_word(&self, v: NodeId) -> u64 {
        self.next_bits()[v.index()].load(Ordering::Relaxed)
    }

    pub fn visited_word(&self, v: NodeId) -> u64 {
        self.visited[v.index()].load(Ordering::Relaxed)
    }

    /// Nodes with at least one active lane in the current frontier.
    pub fn active_count(&self) -> usize {
        self.counts[(self.epoch() & 1) as usize].load(Ordering::Relaxed)
    }

    /// Nodes with at least one lane set in the next frontier.
    pub fn next_count(&self) -> usize {
        self.counts[((self.epoch() + 1) & 1) as usize].load(Ordering::Relaxed)
    }

    pub fn start(&self) -> SwapOutcome {
        self.publish(self.epoch())
    }

    pub fn swap(&self) -> SwapOutcome {
        let old = self.epoch();
        let parity = (old & 1) as usize;
        if self.counts[parity].load(Ordering::Relaxed) != 0 {
            for w in self.bits[parity].iter() {
                w.store(0, Ordering::Relaxed);
            }
            self.counts[parity].store(0, Ordering::Relaxed);
        }
        self.epoch.store(old + 1, Ordering::Relaxed);
        self.publish(old + 1)
    }

    fn publish(&self, epoch: u32) -> SwapOutcome {
        if self.counts[(epoch & 1) as usize].load(Ordering::Relaxed) == 0 {
            return SwapOutcome::Converged;
        }
        self.carver
            .publish(epoch, self.num_nodes(), self.morsel_size, MorselKind::Dense);
        SwapOutcome::Continue
    }

    pub fn has_work(&self) -> bool {
        self.carver.has_work()
    }

    pub fn grab_frontier_morsel(&self) -> Option<FrontierMorsel> {
        self.carver.grab()
    }

    /// Visits each node of `fm` with a non-zero frontier word, clearing the word.
    pub fn for_each_active(
        &self,
        fm: &FrontierMorsel,
        mut visit: impl FnMut(NodeId, u64) -> Result<()>,
    ) -> Result<()> {
        let parity = (fm.epoch & 1) as usize;
        let mut drained = 0;
        for (i, w) in self.bits[parity][fm.begin..fm.end].iter().enumerate() {
            let word = w.load(Ordering::Relaxed);
            if word != 0 {
                w.store(0, Ordering::Relaxed);
                drained += 1;
                visit(NodeId((fm.begin + i) as u32), word)?;
            }
        }
        self.counts[parity].fetch_sub(drained, Ordering::Relaxed);
        Ok(())
    }

    /// Adds nodes that entered the next frontier during a morsel.
    pub fn add_activations(&self, n: usize) {
        if n > 0 {
            self.counts[((self.epoch() + 1) & 1) as usize].fetch_add(n, Ordering::Relaxed);
        }
    }

    pub fn complete_morsel(&self, _fm: &FrontierMorsel) -> bool {
        self.carver.complete()
    }

    /// Relaxes edge `(u, v)` for every lane active at `u` (`word`).
    #[inline]
    pub fn ms_edge_compute(
        &self,
        word: u64,
        u: NodeId,
        v: NodeId,
        via: EdgeId,
        iter: u32,
        thread: usize,
    ) -> Result<LaneUpdate> {
        let i = v.index();
        let next = &self.next_bits()[i];
        let visited = &self.visited[i];
        let lanes = match &self.aux {
            LaneAux::Lengths(len) => {
                let mut fresh = word & !visited.load(Ordering::Relaxed);
                if fresh == 0 {
                    return Ok(LaneUpdate::Unchanged);
                }
                fresh &= !visited.fetch_or(fresh, Ordering::Relaxed);
                if fresh == 0 {
                    return Ok(LaneUpdate::Unchanged);
                }
                check_depth(iter)?;
                for lane in SetBits(fresh) {
                    len[i * LANES + lane].store(iter as u8, Ordering::Relaxed);
                }
                fresh
            }
            LaneAux::Paths(parents) => {
                // Lanes set in visited but not in next were reached at an earlier
                // level. Writers set next before visited, so reading visited first
                // never mistakes a same-level lane for an earlier one.
                let seen = visited.load(Ordering::Acquire);
                let same_level = next.load(Ordering::Acquire);
                let lanes = word & !(seen & !same_level);
                if lanes == 0 {
                    return Ok(LaneUpdate::Unchanged);
                }
                check_depth(iter)?;
                for lane in SetBits(lanes) {
                    parents.add_parent_edge(v, lane, u, via, iter, thread)?;
                }
                lanes
            }
        };
        let prior = next.fetch_or(lanes, Ordering::AcqRel);
        visited.fetch_or(lanes, Ordering::AcqRel);
        Ok(if prior == 0 {
            LaneUpdate::Activated
        } else {
            LaneUpdate::Extended
        })
    }

    pub fn reached(&self, v: NodeId, lane: usize) -> bool {
        lane < self.sources.len() && self.visited_word(v) & (1 << lane) != 0
    }

    /// Distance of `v` from `sources[lane]`, if reached.
    pub fn length(&self, v: NodeId, lane: usize) -> Option<u8> {
        if !self.reached(v, lane) {
            return None;
        }
        match &self.aux {
            LaneAux::Lengths(len) => Some(len[v.index() * LANES + lane].load(Ordering::Relaxed)),
            LaneAux::Paths(parents) => {
                if v == self.sources[lane] {
                    Some(0)
                } else {
                    parents.head_iter(v, lane).map(|i| i as u8)
                }
            }
        }
    }

    pub fn parents(&self) -> Option<&ParentStore> {
        match &self.aux {
            LaneAux::Paths(p) => Some(p),
            LaneAux::Lengths(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_random_graph, CsrGraph};
    use std::collections::VecDeque;
    use std::sync::Barrier;
    use std::thread;

    fn bfs(g: &CsrGraph, s: NodeId) -> Vec<Option<u8>> {
        let mut dist = vec![None; g.num_nodes()];
        dist[s.index()] = Some(0u8);
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &v in g.neighbors(u) {
                if dist[v.index()].is_none() {
                    dist[v.index()] = Some(dist[u.index()].unwrap() + 1);
                    q.push_back(v);
                }
            }
        }
        dist
    }

    /// Drives a lane state to convergence on one thread.
    fn run_lanes(g: &CsrGraph, st: &LaneState) {
        let mut outcome = st.start();
        while outcome == SwapOutcome::Continue {
            let iter = st.epoch() + 1;
            while let Some(fm) = st.grab_frontier_morsel() {
                let mut activated = 0;
                st.for_each_active(&fm, |u, word| {
                    for (v, e) in g.scan_fwd(u) {
                        if st.ms_edge_compute(word, u, v, e, iter, 0)? == LaneUpdate::Activated {
                            activated += 1;
                        }
                    }
                    Ok(())
                })
                .unwrap();
                st.add_activations(activated);
                if st.complete_morsel(&fm) {
                    outcome = st.swap();
                    break;
                }
            }
        }
    }

    #[test]
    fn lengths_assign_once() {
        let st = LengthState::new(5, NodeId(0));
        assert_eq!(st.length(NodeId(0)), Some(0));
        assert_eq!(st.length(NodeId(4)), None);
        assert!(st.edge_compute_lengths(NodeId(2), NodeId(4), 3).unwrap());
        assert_eq!(st.length(NodeId(4)), Some(3));
        assert!(!st.edge_compute_lengths(NodeId(1), NodeId(4), 3).unwrap());
        assert!(!st.edge_compute_lengths(NodeId(1), NodeId(0), 1).unwrap());
        assert_eq!(st.length(NodeId(4)), Some(3));
    }

    #[test]
    fn lengths_reject_overflowing_depth() {
        let st = LengthState::new(3, NodeId(0));
        assert!(st.edge_compute_lengths(NodeId(0), NodeId(1), 254).unwrap());
        let err = st
            .edge_compute_lengths(NodeId(1), NodeId(2), 255)
            .unwrap_err();
        assert!(matches!(
            err,
            Error::DepthOverflow {
                depth: 255,
                max: 254
            }
        ));
    }

    #[test]
    fn paths_record_fresh_and_same_level_parents() {
        let st = PathState::new(4, NodeId(0), 1, MemoryBudget::unlimited());
        assert!(st
            .edge_compute_paths(NodeId(0), NodeId(1), EdgeId(0), 1, 0)
            .unwrap());
        assert_eq!(st.parents().chain(NodeId(1), 0).len(), 1);
        assert_eq!(st.dist(NodeId(1)), Some(1));
        // Another parent on the same level is kept.
        assert!(st
            .edge_compute_paths(NodeId(2), NodeId(1), EdgeId(3), 1, 0)
            .unwrap());
        assert_eq!(st.parents().collect_parents(NodeId(1), 0, 1).len(), 2);
        // A later level never adds records.
        assert!(!st
            .edge_compute_paths(NodeId(3), NodeId(1), EdgeId(7), 2, 0)
            .unwrap());
        assert!(!st
            .edge_compute_paths(NodeId(1), NodeId(0), EdgeId(2), 2, 0)
            .unwrap());
        assert_eq!(st.parents().chain(NodeId(1), 0).len(), 2);
        assert!(st.parents().chain(NodeId(0), 0).is_empty());
    }

    #[test]
    fn racing_same_level_parents_are_both_kept() {
        for _ in 0..200 {
            let st = PathState::new(4, NodeId(0), 2, MemoryBudget::unlimited());
            let barrier = Barrier::new(2);
            thread::scope(|s| {
                s.spawn(|| {
                    barrier.wait();
                    st.edge_compute_paths(NodeId(1), NodeId(3), EdgeId(1), 2, 0)
                        .unwrap()
                });
                s.spawn(|| {
                    barrier.wait();
                    st.edge_compute_paths(NodeId(2), NodeId(3), EdgeId(2), 2, 1)
                        .unwrap()
                });
            });
            assert_eq!(
                st.parents().collect_parents(NodeId(3), 0, 2),
                vec![(NodeId(1), EdgeId(1)), (NodeId(2), EdgeId(2))]
            );
            assert_eq!(st.dist(NodeId(3)), Some(2));
        }
    }

    #[test]
    fn decode_bits() {
        assert!(decode_set_bits(0).is_empty());
        assert_eq!(decode_set_bits(0b1010), vec![1, 3]);
        assert_eq!(decode_set_bits(u64::MAX), (0..64).collect::<Vec<_>>());
        assert_eq!(decode_set_bits(1 << 63), vec![63]);
    }

    #[test]
    fn lane_relaxation_masks_visited_lanes() {
        let sources: Vec<NodeId> = (0..4).map(NodeId).collect();
        let st = LaneState::new(
            8,
            &sources,
            ReturnMode::Lengths,
            1,
            8,
            MemoryBudget::unlimited(),
        )
        .unwrap();
        let v = NodeId(0);
        assert_eq!(st.visited_word(v), 0b0001);
        let upd = st
            .ms_edge_compute(0b0101, NodeId(2), v, EdgeId(0), 1, 0)
            .unwrap();
        assert_eq!(upd, LaneUpdate::Activated);
        assert_eq!(st.visited_word(v), 0b0101);
        assert_eq!(st.next_word(v), 0b0100);
        assert_eq!(st.length(v, 2), Some(1));
        assert_eq!(st.length(v, 1), None);

        let before = (st.visited_word(NodeId(5)), st.next_word(NodeId(5)));
        let upd = st
            .ms_edge_compute(0b0101, NodeId(2), v, EdgeId(0), 1, 0)
            .unwrap();
        assert_eq!(upd, LaneUpdate::Unchanged);
        assert_eq!(
            (st.visited_word(NodeId(5)), st.next_word(NodeId(5))),
            before
        );
    }

    #[test]
    fn lane_budgets_per_node() {
        assert_eq!(ReturnMode::Lengths.bytes_per_node(), 88);
        assert_eq!(ReturnMode::Paths.bytes_per_node(), 536);
        let sources = [NodeId(0)];
        for (mode, per_node) in [(ReturnMode::Lengths, 88), (ReturnMode::Paths, 536)] {
            let st =
                LaneState::new(1000, &sources, mode, 2, 64, MemoryBudget::unlimited()).unwrap();
            assert_eq!(st.preallocated_bytes(), 1000 * per_node);
        }
    }

    #[test]
    fn lane_state_respects_budget() {
        let budget = MemoryBudget::new(Some(88 * 100 - 1));
        let err = LaneState::new(100, &[NodeId(0)], ReturnMode::Lengths, 1, 8, budget.clone())
            .unwrap_err();
        assert!(matches!(err, Error::OutOfMemory { .. }));
        let budget = MemoryBudget::new(Some(88 * 100));
        let st =
            LaneState::new(100, &[NodeId(0)], ReturnMode::Lengths, 1, 8, budget.clone()).unwrap();
        assert_eq!(budget.in_use(), 8800);
        drop(st);
        assert_eq!(budget.in_use(), 0);
    }

    #[test]
    fn saturated_lanes_match_independent_searches() {
        let g = generate_random_graph(1000, 3.0, 11).unwrap();
        let sources: Vec<NodeId> = (0..64).map(|i| NodeId(i * 15 + 1)).collect();
        let st = LaneState::new(
            1000,
            &sources,
            ReturnMode::Lengths,
            1,
            100,
            MemoryBudget::unlimited(),
        )
        .unwrap();
        run_lanes(&g, &st);
        for (lane, &s) in sources.iter().enumerate() {
            let want = bfs(&g, s);
            for v in g.nodes() {
                assert_eq!(st.length(v, lane), want[v.index()], "lane {lane} node {v}");
            }
        }
    }

    #[test]
    fn lane_paths_record_levels() {
        let g = generate_random_graph(300, 2.5, 5).unwrap();
        let sources: Vec<NodeId> = (0..10).map(|i| NodeId(i * 29)).collect();
        let st = LaneState::new(
            300,
            &sources,
            ReturnMode::Paths,
            1,
            32,
            MemoryBudget::unlimited(),
        )
        .unwrap();
        run_lanes(&g, &st);
        let parents = st.parents().unwrap();
        for (lane, &s) in sources.iter().enumerate() {
            let want = bfs(&g, s);
            for v in g.nodes() {
                assert_eq!(st.length(v, lane), want[v.index()]);
                let Some(d) = want[v.index()] else { continue };
                if d == 0 {
                    continue;
                }
                let ps = parents.collect_parents(v, lane, d as u32);
                // Every in-edge from the previous level is recorded exactly once.
                let expected = g
                    .nodes()
                    .flat_map(|p| g.scan_fwd(p).map(move |(w, e)| (p, w, e)))
                    .filter(|&(p, w, _)| w == v && want[p.index()] == Some(d - 1))
                    .count();
                assert_eq!(ps.len(), expected, "lane {lane} node {v}");
                assert_eq!(parents.chain(v, lane).len(), expected);
            }
        }
    }
}
