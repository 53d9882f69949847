//! Immutable compressed-sparse-row graph storage.
//!
//! Nodes are dense 0-based ids taken verbatim from the input. Parallel edges and
//! self-loops are kept, and every adjacency list is sorted ascending so scans are
//! deterministic across runs.

use std::fmt;
use std::io::{BufRead, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest number of nodes a graph may hold; ids must be strictly below it.
pub const MAX_NODES: u64 = u32::MAX as u64;

/// Largest number of stored (directed) edges.
pub const MAX_EDGES: u64 = 1 << 32;

const SNAPSHOT_MAGIC: &[u8; 4] = b"IFE1";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline(always)]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Position of an edge in the CSR neighbor array.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(transparent)]
pub struct EdgeId(pub u64);

impl EdgeId {
    #[inline(always)]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LoadOptions {
    pub directed: bool,
    /// Node ids must be strictly below this cap.
    pub max_nodes: u64,
}

impl LoadOptions {
    pub fn directed(directed: bool) -> Self {
        Self {
            directed,
            max_nodes: MAX_NODES,
        }
    }
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self::directed(true)
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct CsrGraph {
    offsets: Vec<u64>,
    neighbors: Vec<NodeId>,
    directed: bool,
}

impl fmt::Debug for CsrGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CsrGraph")
            .field("num_nodes", &self.num_nodes())
            .field("num_edges", &self.num_edges())
            .field("directed", &self.directed)
            .finish()
    }
}

impl CsrGraph {
    /// Builds a graph from directed arcs. `num_nodes` must exceed every endpoint.
    pub fn from_arcs(num_nodes: usize, arcs: &[(u32, u32)], directed: bool) -> Result<Self> {
        if num_nodes as u64 > MAX_NODES {
            return Err(Error::Capacity(format!(
                "{num_nodes} nodes exceeds the cap of {MAX_NODES}"
            )));
        }
        if arcs.len() as u64 > MAX_EDGES {
            return Err(Error::Capacity(format!(
                "{} edges exceeds the cap of {MAX_EDGES}",
                arcs.len()
            )));
        }
        let mut offsets = vec![0u64; num_nodes + 1];
        for &(u, v) in arcs {
            if u as usize >= num_nodes || v as usize >= num_nodes {
                return Err(Error::Capacity(format!(
                    "edge ({u}, {v}) references a node outside [0, {num_nodes})"
                )));
            }
            offsets[u as usize + 1] += 1;
        }
        for i in 0..num_nodes {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor: Vec<u64> = offsets[..num_nodes].to_vec();
        let mut neighbors = vec![NodeId(0); arcs.len()];
        for &(u, v) in arcs {
            let slot = &mut cursor[u as usize];
            neighbors[*slot as usize] = NodeId(v);
            *slot += 1;
        }
        for u in 0..num_nodes {
            neighbors[offsets[u] as usize..offsets[u + 1] as usize].sort_unstable();
        }
        Ok(Self {
            offsets,
            neighbors,
            directed,
        })
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.neighbors.len()
    }

    /// Whether the graph was loaded as directed. Undirected inputs are stored as
    /// arcs in both directions.
    pub fn is_directed(&self) -> bool {
        self.directed
    }

    #[inline(always)]
    pub fn degree(&self, u: NodeId) -> usize {
        let u = u.index();
        (self.offsets[u + 1] - self.offsets[u]) as usize
    }

    /// Forward neighbors of `u` in storage order.
    #[inline(always)]
    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        let u = u.index();
        &self.neighbors[self.offsets[u] as usize..self.offsets[u + 1] as usize]
    }

    /// Position of `u`'s first edge in the edge array.
    #[inline(always)]
    pub fn first_edge(&self, u: NodeId) -> EdgeId {
        EdgeId(self.offsets[u.index()])
    }

    /// Neighbors of `u` paired with the id of the edge leading to them.
    #[inline]
    pub fn scan_fwd(&self, u: NodeId) -> impl Iterator<Item = (NodeId, EdgeId)> + '_ {
        let base = self.offsets[u.index()];
        self.neighbors(u)
            .iter()
            .enumerate()
            .map(move |(i, &v)| (v, EdgeId(base + i as u64)))
    }

    /// Tail and head of an edge, or `None` when the id is out of range.
    pub fn edge_endpoints(&self, e: EdgeId) -> Option<(NodeId, NodeId)> {
        let pos = e.0;
        if pos >= self.neighbors.len() as u64 {
            return None;
        }
        // offsets is non-decreasing: the tail is the last node whose first edge is <= pos.
        let tail = self.offsets.partition_point(|&o| o <= pos) - 1;
        Some((NodeId(tail as u32), self.neighbors[pos as usize]))
    }

    pub fn offsets(&self) -> &[u64] {
        &self.offsets
    }

    pub fn neighbor_array(&self) -> &[NodeId] {
        &self.neighbors
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.num_nodes() as u32).map(NodeId)
    }

    /// Writes every stored arc as a `u v` line, in CSR order.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        for u in self.nodes() {
            for &v in self.neighbors(u) {
                writeln!(out, "{u} {v}")?;
            }
        }
        Ok(())
    }

    /// Binary snapshot: `IFE1`, u64 node count, u64 edge count, then the offsets
    /// and neighbor arrays as little-endian u64 values.
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(SNAPSHOT_MAGIC)?;
        out.write_all(&(self.num_nodes() as u64).to_le_bytes())?;
        out.write_all(&(self.num_edges() as u64).to_le_bytes())?;
        for &o in &self.offsets {
            out.write_all(&o.to_le_bytes())?;
        }
        for &v in &self.neighbors {
            out.write_all(&(v.0 as u64).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(Error::Snapshot("bad magic bytes".into()));
        }
        let num_nodes = read_u64(&mut input)?;
        let num_edges = read_u64(&mut input)?;
        if num_nodes > MAX_NODES || num_edges > MAX_EDGES {
            return Err(Error::Capacity(format!(
                "snapshot declares {num_nodes} nodes and {num_edges} edges"
            )));
        }
        let mut offsets = Vec::with_capacity(num_nodes as usize + 1);
        for _ in 0..=num_nodes {
            offsets.push(read_u64(&mut input)?);
        }
        if offsets[0] != 0
            || offsets[num_nodes as usize] != num_edges
            || offsets.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::Snapshot("offsets are not a valid prefix sum".into()));
        }
        let mut neighbors = Vec::with_capacity(num_edges as usize);
        for _ in 0..num_edges {
            let v = read_u64(&mut input)?;
            if v >= num_nodes {
                return Err(Error::Snapshot(format!("neighbor {v} out of range")));
            }
            neighbors.push(NodeId(v as u32));
        }
        Ok(Self {
            offsets,
            neighbors,
            directed: true,
        })
    }
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

/// Parses whitespace-separated `u v` lines. Lines starting with `#` are comments.
pub fn load_edge_list<R: BufRead>(input: R, options: LoadOptions) -> Result<CsrGraph> {
    let mut arcs: Vec<(u32, u32)> = Vec::new();
    let mut num_nodes: u64 = 0;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let (Some(a), Some(b), None) = (tokens.next(), tokens.next(), tokens.next()) else {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected two node ids, got {trimmed:?}"),
            });
        };
        let u = parse_id(a, lineno, options.max_nodes)?;
        let v = parse_id(b, lineno, options.max_nodes)?;
        num_nodes = num_nodes.max(u as u64 + 1).max(v as u64 + 1);
        arcs.push((u, v));
        if !options.directed {
            arcs.push((v, u));
        }
    }
    CsrGraph::from_arcs(num_nodes as usize, &arcs, options.directed)
}

fn parse_id(token: &str, line: usize, max_nodes: u64) -> Result<u32> {
    let id: u64 = token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("malformed node id {token:?}"),
    })?;
    if id >= max_nodes.min(MAX_NODES) {
        return Err(Error::Capacity(format!(
            "line {line}: node id {id} exceeds the cap of {max_nodes} nodes"
        )));
    }
    Ok(id as u32)
}

/// Directed G(n, m) graph with `round(num_nodes * avg_degree)` arcs drawn
/// uniformly with replacement from all ordered pairs.
pub fn generate_random_graph(num_nodes: usize, avg_degree: f64, seed: u64) -> Result<CsrGraph> {
    if num_nodes == 0 {
        return Err(Error::InvalidQuery(
            "random graph needs at least one node".into(),
        ));
    }
    if !avg_degree.is_finite() || avg_degree < 0.0 {
        return Err(Error::InvalidQuery(format!(
            "average degree must be a non-negative number, got {avg_degree}"
        )));
    }
    if num_nodes as u64 > MAX_NODES {
        return Err(Error::Capacity(format!(
            "{num_nodes} nodes exceeds the cap of {MAX_NODES}"
        )));
    }
    let num_edges = (num_nodes as f64 * avg_degree).round();
    if num_edges > MAX_EDGES as f64 {
        return Err(Error::Capacity(format!(
            "{num_edges} edges exceeds the cap of {MAX_EDGES}"
        )));
    }
    let num_edges = num_edges as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = num_nodes as u32;
    let arcs: Vec<(u32, u32)> = (0..num_edges)
        .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
        .collect();
    CsrGraph::from_arcs(num_nodes, &arcs, true)
}
