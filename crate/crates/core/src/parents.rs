//! Shortest-path parent edges: a shared array of per-node head handles plus
//! append-only record arenas, one per worker thread.
//!
//! Each record is 24 bytes: the parent id with the iteration tag packed into the
//! upper 16 bits, the edge id, and a handle to the previous head of the same
//! chain. Handles pack `(thread, index)` into 8 bytes and stay valid as arenas
//! grow. New records are prepended with a compare-and-exchange loop on the head.

use std::mem::size_of;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::Result;
use crate::graph::{EdgeId, NodeId};
use crate::memory::{MemoryBudget, Reservation};

/// Bytes of the first arena block; later blocks double.
pub const ARENA_BLOCK_BYTES: usize = 1 << 20;

const NULL_HANDLE: u64 = u64::MAX;
const INDEX_BITS: u32 = 48;
const INDEX_MASK: u64 = (1 << INDEX_BITS) - 1;
const PARENT_MASK: u64 = (1 << 48) - 1;
const RECORDS_PER_FIRST_BLOCK: usize = ARENA_BLOCK_BYTES / size_of::<ParentRecord>();

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(C)]
pub struct ParentRecord {
    parent_and_iter: u64,
    via_edge: u64,
    next: u64,
}

const _: () = assert!(size_of::<ParentRecord>() == 24);

impl ParentRecord {
    fn new(parent: NodeId, via_edge: EdgeId, iter: u32) -> Self {
        Self {
            parent_and_iter: ((iter as u64) << 48) | (parent.0 as u64 & PARENT_MASK),
            via_edge: via_edge.0,
            next: NULL_HANDLE,
        }
    }

    pub fn parent(&self) -> NodeId {
        NodeId((self.parent_and_iter & PARENT_MASK) as u32)
    }

    pub fn iter(&self) -> u32 {
        (self.parent_and_iter >> 48) as u32
    }

    pub fn via_edge(&self) -> EdgeId {
        EdgeId(self.via_edge)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Handle(u64);

impl Handle {
    fn pack(thread: usize, index: usize) -> Self {
        Handle(((thread as u64) << INDEX_BITS) | index as u64)
    }

    fn is_null(self) -> bool {
        self.0 == NULL_HANDLE
    }

    fn thread(self) -> usize {
        (self.0 >> INDEX_BITS) as usize
    }

    fn index(self) -> usize {
        (self.0 & INDEX_MASK) as usize
    }
}

/// Block `b` holds `RECORDS_PER_FIRST_BLOCK << b` records.
fn locate(index: usize) -> (usize, usize) {
    let q = index / RECORDS_PER_FIRST_BLOCK + 1;
    let block = (usize::BITS - 1 - q.leading_zeros()) as usize;
    let before = RECORDS_PER_FIRST_BLOCK * ((1 << block) - 1);
    (block, index - before)
}

#[derive(Debug, Default)]
struct Arena {
    blocks: Vec<Vec<ParentRecord>>,
    len: usize,
    reservations: Vec<Reservation>,
}

impl Arena {
    fn push(&mut self, record: ParentRecord, budget: &Arc<MemoryBudget>) -> Result<usize> {
        let index = self.len;
        let (block, _) = locate(index);
        if block == self.blocks.len() {
            let records = RECORDS_PER_FIRST_BLOCK << block;
            self.reservations
                .push(budget.try_reserve(records * size_of::<ParentRecord>())?);
            self.blocks.push(Vec::with_capacity(records));
        }
        self.blocks[block].push(record);
        self.len += 1;
        Ok(index)
    }

    fn get(&self, index: usize) -> &ParentRecord {
        let (block, offset) = locate(index);
        &self.blocks[block][offset]
    }

    fn get_mut(&mut self, index: usize) -> &mut ParentRecord {
        let (block, offset) = locate(index);
        &mut self.blocks[block][offset]
    }

    fn reserved_bytes(&self) -> usize {
        self.blocks.iter().map(|b| b.capacity()).sum::<usize>() * size_of::<ParentRecord>()
    }
}

/// Parent chains for `num_nodes * lanes` slots. Single-source searches use one
/// lane; a multi-source search keeps one chain per (node, lane).
#[derive(Debug)]
pub struct ParentStore {
    heads: Box<[AtomicU64]>,
    lanes: usize,
    arenas: Box<[Mutex<Arena>]>,
    frozen: OnceLock<Box<[Arena]>>,
    budget: Arc<MemoryBudget>,
}

impl ParentStore {
    pub fn new(num_nodes: usize, num_threads: usize) -> Self {
        Self::with_lanes(num_nodes, 1, num_threads, MemoryBudget::unlimited())
    }

    pub fn with_lanes(
        num_nodes: usize,
        lanes: usize,
        num_threads: usize,
        budget: Arc<MemoryBudget>,
    ) -> Self {
        assert!((1..(1 << 16) - 1).contains(&num_threads));
        Self {
            heads: (0..num_nodes * lanes)
                .map(|_| AtomicU64::new(NULL_HANDLE))
                .collect(),
            lanes,
            arenas: (0..num_threads)
                .map(|_| Mutex::new(Arena::default()))
                .collect(),
            frozen: OnceLock::new(),
            budget,
        }
    }

    pub fn lanes(&self) -> usize {
        self.lanes
    }

    #[inline(always)]
    fn slot(&self, child: NodeId, lane: usize) -> &AtomicU64 {
        debug_assert!(lane < self.lanes);
        &self.heads[child.index() * self.lanes + lane]
    }

    /// Prepends `(parent, via_edge, iter)` to the chain of `(child, lane)` using
    /// `thread`'s arena.
    pub fn add_parent_edge(
        &self,
        child: NodeId,
        lane: usize,
        parent: NodeId,
        via_edge: EdgeId,
        iter: u32,
        thread: usize,
    ) -> Result<()> {
        debug_assert!(self.frozen.get().is_none(), "store is frozen");
        debug_assert!((1..(1 << 16)).contains(&iter));
        let mut arena = self.arenas[thread].lock().expect("arena poisoned");
        let index = arena.push(ParentRecord::new(parent, via_edge, iter), &self.budget)?;
        let handle = Handle::pack(thread, index);
        let slot = self.slot(child, lane);
        let mut observed = slot.load(Ordering::Acquire);
        loop {
            arena.get_mut(index).next = observed;
            match slot.compare_exchange_weak(
                observed,
                handle.0,
                Ordering::AcqRel,
                Ordering::Acquire,
            ) {
                Ok(_) => return Ok(()),
                Err(current) => observed = current,
            }
        }
    }

    /// Makes the arenas readable without locking. Call once the extension phase
    /// is over; later calls are no-ops.
    pub fn freeze(&self) {
        self.frozen.get_or_init(|| {
            self.arenas
                .iter()
                .map(|a| std::mem::take(&mut *a.lock().expect("arena poisoned")))
                .collect()
        });
    }

    fn with_record<T>(&self, handle: Handle, f: impl FnOnce(&ParentRecord) -> T) -> T {
        match self.frozen.get() {
            Some(arenas) => f(arenas[handle.thread()].get(handle.index())),
            None => {
                let arena = self.arenas[handle.thread()].lock().expect("arena poisoned");
                f(arena.get(handle.index()))
            }
        }
    }

    /// Walks the chain of `(child, lane)` from the newest record.
    pub fn chain(&self, child: NodeId, lane: usize) -> Vec<ParentRecord> {
        let mut out = Vec::new();
        let mut h = Handle(self.slot(child, lane).load(Ordering::Acquire));
        while !h.is_null() {
            let record = self.with_record(h, |r| *r);
            out.push(record);
            h = Handle(record.next);
        }
        out
    }

    pub fn has_parents(&self, child: NodeId, lane: usize) -> bool {
        !Handle(self.slot(child, lane).load(Ordering::Acquire)).is_null()
    }

    /// Iteration tag of the newest record of `(child, lane)`.
    pub fn head_iter(&self, child: NodeId, lane: usize) -> Option<u32> {
        let h = Handle(self.slot(child, lane).load(Ordering::Acquire));
        (!h.is_null()).then(|| self.with_record(h, |r| r.iter()))
    }

    /// Distinct `(parent, edge)` pairs recorded for `(child, lane)` at `at_iter`,
    /// sorted ascending.
    pub fn collect_parents(
        &self,
        child: NodeId,
        lane: usize,
        at_iter: u32,
    ) -> Vec<(NodeId, EdgeId)> {
        let mut out: Vec<(NodeId, EdgeId)> = self
            .chain(child, lane)
            .into_iter()
            .filter(|r| r.iter() == at_iter)
            .map(|r| (r.parent(), r.via_edge()))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn num_records(&self) -> usize {
        match self.frozen.get() {
            Some(arenas) => arenas.iter().map(|a| a.len).sum(),
            None => self
                .arenas
                .iter()
                .map(|a| a.lock().expect("arena poisoned").len)
                .sum(),
        }
    }

    /// Bytes occupied by records.
    pub fn record_bytes(&self) -> usize {
        self.num_records() * size_of::<ParentRecord>()
    }

    /// Bytes allocated for arena blocks, used or not.
    pub fn reserved_bytes(&self) -> usize {
        match self.frozen.get() {
            Some(arenas) => arenas.iter().map(Arena::reserved_bytes).sum(),
            None => self
                .arenas
                .iter()
                .map(|a| a.lock().expect("arena poisoned").reserved_bytes())
                .sum(),
        }
    }

    /// Bytes of the head-handle array.
    pub fn head_bytes(&self) -> usize {
        self.heads.len() * size_of::<AtomicU64>()
    }
}
