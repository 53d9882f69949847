//! Dense current/next frontiers, the sparse overlay, and frontier-morsel carving.
//!
//! Morsels are carved from an epoch-tagged cursor. The cursor word holds the
//! iteration epoch in its upper 32 bits and the next morsel index in the lower 32
//! bits, and a separate shape word holds the epoch and the number of morsels of
//! that epoch. A grab is valid only if the epoch it drew matches the published
//! shape, so a thread that raced past an iteration boundary can never claim a
//! morsel from the wrong iteration. Exactly `count` valid grabs exist per epoch and
//! each is completed once, so the completion that drops `remaining` to zero is
//! unique and owns the iteration boundary.

use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, AtomicUsize, Ordering};

use crate::graph::NodeId;

pub const DEFAULT_DENSE_MORSEL: usize = 2048;
pub const DEFAULT_SPARSE_MORSEL: usize = 1024;

const INDEX_MASK: u64 = u32::MAX as u64;
const MAX_MORSELS_PER_EPOCH: usize = 1 << 31;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MorselSizes {
    pub dense: usize,
    pub sparse: usize,
}

impl Default for MorselSizes {
    fn default() -> Self {
        Self {
            dense: DEFAULT_DENSE_MORSEL,
            sparse: DEFAULT_SPARSE_MORSEL,
        }
    }
}

impl MorselSizes {
    pub fn uniform(size: usize) -> Self {
        Self {
            dense: size,
            sparse: size,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MorselKind {
    /// Positions are node ids; consumers must re-check activity per node.
    Dense,
    /// Positions index the sparse overlay; every covered node is active.
    Sparse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FrontierMorsel {
    pub kind: MorselKind,
    pub begin: usize,
    pub end: usize,
    /// Iteration this morsel belongs to.
    pub epoch: u32,
}

impl FrontierMorsel {
    pub fn len(&self) -> usize {
        self.end - self.begin
    }

    pub fn is_empty(&self) -> bool {
        self.begin == self.end
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwapOutcome {
    Continue,
    Converged,
}

#[inline(always)]
fn split(word: u64) -> (u32, u64) {
    ((word >> 32) as u32, word & INDEX_MASK)
}

/// Lock-free carving of one iteration's domain into half-open ranges.
#[derive(Debug)]
pub struct MorselCarver {
    cursor: AtomicU64,
    shape: AtomicU64,
    remaining: AtomicUsize,
    domain_len: AtomicUsize,
    morsel_size: AtomicUsize,
    sparse: AtomicBool,
}

impl Default for MorselCarver {
    fn default() -> Self {
        Self::new()
    }
}

impl MorselCarver {
    pub fn new() -> Self {
        Self {
            cursor: AtomicU64::new(0),
            shape: AtomicU64::new(0),
            remaining: AtomicUsize::new(0),
            domain_len: AtomicUsize::new(0),
            morsel_size: AtomicUsize::new(1),
            sparse: AtomicBool::new(false),
        }
    }

    /// Opens `epoch` over `[0, domain_len)`. Must be called by a single thread
    /// after every morsel of the previous epoch has completed.
    pub fn publish(&self, epoch: u32, domain_len: usize, morsel_size: usize, kind: MorselKind) {
        debug_assert!(domain_len > 0);
        let size = morsel_size
            .max(1)
            .max(domain_len.div_ceil(MAX_MORSELS_PER_EPOCH));
        let count = domain_len.div_ceil(size);
        self.domain_len.store(domain_len, Ordering::Relaxed);
        self.morsel_size.store(size, Ordering::Relaxed);
        self.sparse
            .store(kind == MorselKind::Sparse, Ordering::Relaxed);
        self.remaining.store(count, Ordering::Relaxed);
        self.shape
            .store(((epoch as u64) << 32) | count as u64, Ordering::Release);
        self.cursor.store((epoch as u64) << 32, Ordering::Release);
    }

    /// Whether a grab issued now would likely succeed.
    pub fn has_work(&self) -> bool {
        let (epoch, idx) = split(self.cursor.load(Ordering::Acquire));
        let (shape_epoch, count) = split(self.shape.load(Ordering::Acquire));
        epoch == shape_epoch && idx < count
    }

    pub fn grab(&self) -> Option<FrontierMorsel> {
        if !self.has_work() {
            return None;
        }
        let (epoch, idx) = split(self.cursor.fetch_add(1, Ordering::AcqRel));
        let (shape_epoch, count) = split(self.shape.load(Ordering::Acquire));
        if shape_epoch != epoch || idx >= count {
            return None;
        }
        let size = self.morsel_size.load(Ordering::Relaxed);
        let len = self.domain_len.load(Ordering::Relaxed);
        let kind = if self.sparse.load(Ordering::Relaxed) {
            MorselKind::Sparse
        } else {
            MorselKind::Dense
        };
        let begin = idx as usize * size;
        Some(FrontierMorsel {
            kind,
            begin,
            end: (begin + size).min(len),
            epoch,
        })
    }

    /// Marks one grabbed morsel done; returns true for the last one of the epoch.
    pub fn complete(&self) -> bool {
        self.remaining.fetch_sub(1, Ordering::AcqRel) == 1
    }
}

/// One boolean per node plus a count of set entries, exact at iteration
/// boundaries.
#[derive(Debug)]
pub struct DenseFrontier {
    active: Box<[AtomicBool]>,
    count: AtomicUsize,
}

impl DenseFrontier {
    pub fn new(num_nodes: usize) -> Self {
        Self {
            active: (0..num_nodes).map(|_| AtomicBool::new(false)).collect(),
            count: AtomicUsize::new(0),
        }
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    #[inline(always)]
    pub fn is_active(&self, v: NodeId) -> bool {
        self.active[v.index()].load(Ordering::Relaxed)
    }

    /// Sets `v` without touching the count; true when this call set it first.
    #[inline(always)]
    pub fn try_activate(&self, v: NodeId) -> bool {
        let slot = &self.active[v.index()];
        !slot.load(Ordering::Relaxed) && !slot.swap(true, Ordering::Relaxed)
    }

    #[inline]
    pub fn add_to_count(&self, n: usize) {
        if n > 0 {
            self.count.fetch_add(n, Ordering::Relaxed);
        }
    }

    pub fn active_count(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }

    pub fn active_nodes(&self) -> Vec<NodeId> {
        self.active
            .iter()
            .enumerate()
            .filter(|(_, a)| a.load(Ordering::Relaxed))
            .map(|(i, _)| NodeId(i as u32))
            .collect()
    }

    fn clear_all(&self) {
        for a in self.active.iter() {
            a.store(false, Ordering::Relaxed);
        }
        self.count.store(0, Ordering::Relaxed);
    }
}

/// Current and next frontiers of one IFE subroutine.
///
/// Consumers drain the current frontier through [`FrontierPair::for_each_active`],
/// which clears every entry it visits. Once all morsels of an iteration are done
/// the current buffer is empty again and becomes the next buffer at the swap.
#[derive(Debug)]
pub struct FrontierPair {
    buffers: [DenseFrontier; 2],
    overlay: Box<[AtomicU32]>,
    overlay_len: AtomicUsize,
    epoch: AtomicU32,
    carver: MorselCarver,
    sizes: MorselSizes,
}

impl FrontierPair {
    pub fn new(num_nodes: usize, sizes: MorselSizes) -> Self {
        Self {
            buffers: [DenseFrontier::new(num_nodes), DenseFrontier::new(num_nodes)],
            overlay: (0..num_nodes / 8).map(|_| AtomicU32::new(0)).collect(),
            overlay_len: AtomicUsize::new(0),
            epoch: AtomicU32::new(0),
            carver: MorselCarver::new(),
            sizes,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.buffers[0].len()
    }

    pub fn epoch(&self) -> u32 {
        self.epoch.load(Ordering::Relaxed)
    }

    pub fn current(&self) -> &DenseFrontier {
        &self.buffers[(self.epoch() & 1) as usize]
    }

    pub fn next(&self) -> &DenseFrontier {
        &self.buffers[((self.epoch() + 1) & 1) as usize]
    }

    #[inline(always)]
    pub fn is_active(&self, v: NodeId) -> bool {
        self.current().is_active(v)
    }

    /// Marks `v` active in the next frontier. Idempotent.
    pub fn set_active(&self, v: NodeId) -> bool {
        let next = self.next();
        let first = next.try_activate(v);
        if first {
            next.add_to_count(1);
        }
        first
    }

    /// Puts `v` directly into the current frontier, before [`Self::start`].
    pub fn seed(&self, v: NodeId) {
        let cur = self.current();
        if cur.try_activate(v) {
            cur.add_to_count(1);
        }
    }

    /// Opens the first iteration over the seeded current frontier.
    pub fn start(&self) -> SwapOutcome {
        self.publish_current(self.epoch())
    }

    /// Exchanges the roles of the two buffers and prepares dispatch for the new
    /// current frontier. Single caller per iteration boundary.
    pub fn swap_and_maybe_sparsify(&self) -> SwapOutcome {
        let old = self.epoch();
        let drained = &self.buffers[(old & 1) as usize];
        if drained.active_count() != 0 {
            drained.clear_all();
        }
        let epoch = old + 1;
        self.epoch.store(epoch, Ordering::Relaxed);
        self.publish_current(epoch)
    }

    fn publish_current(&self, epoch: u32) -> SwapOutcome {
        let cur = &self.buffers[(epoch & 1) as usize];
        let count = cur.active_count();
        if count == 0 {
            self.overlay_len.store(0, Ordering::Relaxed);
            return SwapOutcome::Converged;
        }
        let n = self.num_nodes();
        if count < n / 8 {
            let mut k = 0;
            for (i, a) in cur.active.iter().enumerate() {
                if a.load(Ordering::Relaxed) {
                    self.overlay[k].store(i as u32, Ordering::Relaxed);
                    k += 1;
                }
            }
            debug_assert_eq!(k, count);
            self.overlay_len.store(k, Ordering::Relaxed);
            self.carver
                .publish(epoch, k, self.sizes.sparse, MorselKind::Sparse);
        } else {
            self.overlay_len.store(0, Ordering::Relaxed);
            self.carver
                .publish(epoch, n, self.sizes.dense, MorselKind::Dense);
        }
        SwapOutcome::Continue
    }

    /// Whether the current frontier carries a sparse overlay.
    pub fn has_overlay(&self) -> bool {
        self.overlay_len.load(Ordering::Relaxed) > 0
    }

    pub fn overlay_ids(&self) -> Vec<NodeId> {
        let len = self.overlay_len.load(Ordering::Relaxed);
        self.overlay[..len]
            .iter()
            .map(|a| NodeId(a.load(Ordering::Relaxed)))
            .collect()
    }

    pub fn has_work(&self) -> bool {
        self.carver.has_work()
    }

    pub fn grab_frontier_morsel(&self) -> Option<FrontierMorsel> {
        self.carver.grab()
    }

    /// Visits every active node of `fm` and clears it from the current frontier.
    pub fn for_each_active<E>(
        &self,
        fm: &FrontierMorsel,
        mut visit: impl FnMut(NodeId) -> Result<(), E>,
    ) -> Result<(), E> {
        let cur = &self.buffers[(fm.epoch & 1) as usize];
        let mut drained = 0;
        match fm.kind {
            MorselKind::Dense => {
                for (i, slot) in cur.active[fm.begin..fm.end].iter().enumerate() {
                    if slot.load(Ordering::Relaxed) {
                        slot.store(false, Ordering::Relaxed);
                        drained += 1;
                        visit(NodeId((fm.begin + i) as u32))?;
                    }
                }
            }
            MorselKind::Sparse => {
                for id in &self.overlay[fm.begin..fm.end] {
                    let u = NodeId(id.load(Ordering::Relaxed));
                    let slot = &cur.active[u.index()];
                    debug_assert!(
                        slot.load(Ordering::Relaxed),
                        "sparse morsel hit inactive node"
                    );
                    slot.store(false, Ordering::Relaxed);
                    drained += 1;
                    visit(u)?;
                }
            }
        }
        cur.count.fetch_sub(drained, Ordering::Relaxed);
        Ok(())
    }

    /// Completes a morsel; true when the caller finished the iteration's last one.
    pub fn complete_morsel(&self, _fm: &FrontierMorsel) -> bool {
        self.carver.complete()
    }
}
