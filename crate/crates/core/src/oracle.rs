//! Naive references for tests: an adjacency-map loader, BFS distances and
//! exhaustive shortest-path enumeration on small graphs.

use std::collections::{BTreeMap, VecDeque};
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::graph::{CsrGraph, NodeId};

pub use crate::engine::replay_policy_single_threaded;

/// Largest graph the exhaustive enumeration accepts.
pub const MAX_BRUTE_FORCE_NODES: usize = 64;

/// Out-neighbor lists keyed by node, built straight from edge-list text.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AdjacencyMap {
    num_nodes: usize,
    adj: BTreeMap<u32, Vec<u32>>,
}

impl AdjacencyMap {
    /// Parses `u v` lines (blank and `#` lines skipped). Every arc is kept as
    /// written; `num_nodes` may exceed the largest id to cover isolated nodes.
    pub fn from_edge_list<R: BufRead>(num_nodes: usize, input: R) -> Result<Self> {
        let mut map = Self {
            num_nodes,
            adj: BTreeMap::new(),
        };
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let ids: Vec<u32> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    line: i + 1,
                    message: format!("{e}"),
                })?;
            let [u, v] = ids[..] else {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "expected two ids".into(),
                });
            };
            map.num_nodes = map.num_nodes.max(u.max(v) as usize + 1);
            map.adj.entry(u).or_default().push(v);
        }
        Ok(map)
    }

    /// Round-trips `g` through its edge-list text so nothing of the CSR layout
    /// leaks into the reference.
    pub fn from_graph(g: &CsrGraph) -> Result<Self> {
        let mut text = Vec::new();
        g.write_edge_list(&mut text)?;
        Self::from_edge_list(g.num_nodes(), text.as_slice())
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn neighbors(&self, u: u32) -> &[u32] {
        self.adj.get(&u).map_or(&[], Vec::as_slice)
    }

    pub fn bfs_distances(&self, src: NodeId) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.num_nodes];
        dist[src.index()] = Some(0);
        let mut queue = VecDeque::from([src.0]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u as usize].unwrap();
            for &v in self.neighbors(u) {
                if dist[v as usize].is_none() {
                    dist[v as usize] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Every minimum-length walk from `src`, grouped by destination, as node
    /// sequences. Parallel arcs yield repeated sequences.
    pub fn all_shortest_paths_from(
        &self,
        src: NodeId,
    ) -> Result<BTreeMap<NodeId, Vec<Vec<NodeId>>>> {
        if self.num_nodes > MAX_BRUTE_FORCE_NODES {
            return Err(Error::GraphTooLarge {
                nodes: self.num_nodes,
                max: MAX_BRUTE_FORCE_NODES,
            });
        }
        let dist = self.bfs_distances(src);
        let horizon = dist.iter().flatten().copied().max().unwrap_or(0) as usize;
        let mut out: BTreeMap<NodeId, Vec<Vec<NodeId>>> = BTreeMap::new();
        let mut walk = vec![src.0];
        let mut on_walk = vec![false; self.num_nodes];
        on_walk[src.index()] = true;
        self.enumerate(&dist, horizon, &mut walk, &mut on_walk, &mut out);
        for paths in out.values_mut() {
            paths.sort();
        }
        Ok(out)
    }

    /// Depth-first over every simple walk up to `horizon` arcs, keeping walks
    /// whose length equals the BFS distance of their endpoint.
    fn enumerate(
        &self,
        dist: &[Option<u32>],
        horizon: usize,
        walk: &mut Vec<u32>,
        on_walk: &mut [bool],
        out: &mut BTreeMap<NodeId, Vec<Vec<NodeId>>>,
    ) {
        let last = *walk.last().unwrap();
        if dist[last as usize] == Some(walk.len() as u32 - 1) {
            out.entry(NodeId(last))
                .or_default()
                .push(walk.iter().map(|&n| NodeId(n)).collect());
        }
        if walk.len() > horizon {
            return;
        }
        for &v in self.neighbors(last) {
            if on_walk[v as usize] {
                continue;
            }
            on_walk[v as usize] = true;
            walk.push(v);
            self.enumerate(dist, horizon, walk, on_walk, out);
            walk.pop();
            on_walk[v as usize] = false;
        }
    }
}

/// Exhaustive reference for one source.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReferenceResult {
    pub distances: Vec<Option<u32>>,
    /// Present only for graphs within [`MAX_BRUTE_FORCE_NODES`].
    pub shortest_paths: Option<BTreeMap<NodeId, Vec<Vec<NodeId>>>>,
}

pub fn reference_result(g: &CsrGraph, src: NodeId) -> Result<ReferenceResult> {
    let adj = AdjacencyMap::from_graph(g)?;
    let shortest_paths = if adj.num_nodes() <= MAX_BRUTE_FORCE_NODES {
        Some(adj.all_shortest_paths_from(src)?)
    } else {
        None
    };
    Ok(ReferenceResult {
        distances: adj.bfs_distances(src),
        shortest_paths,
    })
}

/// All shortest `src`→`dst` paths as sorted node sequences.
pub fn brute_force_all_shortest_paths(
    g: &CsrGraph,
    src: NodeId,
    dst: NodeId,
) -> Result<Vec<Vec<NodeId>>> {
    let adj = AdjacencyMap::from_graph(g)?;
    let mut all = adj.all_shortest_paths_from(src)?;
    Ok(all.remove(&dst).unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_random_graph;

    fn ids(v: &[u32]) -> Vec<NodeId> {
        v.iter().map(|&n| NodeId(n)).collect()
    }

    #[test]
    fn source_to_itself_is_the_empty_path() {
        let g = CsrGraph::from_arcs(2, &[(0, 1), (0, 0)], true).unwrap();
        assert_eq!(
            brute_force_all_shortest_paths(&g, NodeId(0), NodeId(0)).unwrap(),
            vec![ids(&[0])]
        );
    }

    #[test]
    fn diamond_has_two_paths() {
        let g = CsrGraph::from_arcs(4, &[(0, 1), (0, 2), (1, 3), (2, 3)], true).unwrap();
        assert_eq!(
            brute_force_all_shortest_paths(&g, NodeId(0), NodeId(3)).unwrap(),
            vec![ids(&[0, 1, 3]), ids(&[0, 2, 3])]
        );
    }

    #[test]
    fn disconnected_destination_has_none() {
        let g = CsrGraph::from_arcs(3, &[(0, 1)], true).unwrap();
        assert!(brute_force_all_shortest_paths(&g, NodeId(0), NodeId(2))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn parallel_arcs_repeat_paths() {
        let g = CsrGraph::from_arcs(2, &[(0, 1), (0, 1)], true).unwrap();
        assert_eq!(
            brute_force_all_shortest_paths(&g, NodeId(0), NodeId(1))
                .unwrap()
                .len(),
            2
        );
    }

    #[test]
    fn refuses_large_graphs() {
        let g = generate_random_graph(65, 1.0, 1).unwrap();
        assert!(matches!(
            brute_force_all_shortest_paths(&g, NodeId(0), NodeId(1)),
            Err(Error::GraphTooLarge { nodes: 65, max: 64 })
        ));
    }

    #[test]
    fn path_lengths_agree_with_bfs() {
        for seed in 0..20 {
            let g = generate_random_graph(40, 2.5, seed).unwrap();
            let adj = AdjacencyMap::from_graph(&g).unwrap();
            let dist = adj.bfs_distances(NodeId(0));
            let paths = adj.all_shortest_paths_from(NodeId(0)).unwrap();
            for (v, d) in dist.iter().enumerate() {
                match d {
                    Some(d) => {
                        let ps = &paths[&NodeId(v as u32)];
                        assert!(!ps.is_empty());
                        assert!(ps.iter().all(|p| p.len() == *d as usize + 1));
                    }
                    None => assert!(!paths.contains_key(&NodeId(v as u32))),
                }
            }
        }
    }

    #[test]
    fn loader_keeps_isolated_tail_nodes() {
        let adj = AdjacencyMap::from_edge_list(5, "# c\n0 1\n\n1 2\n".as_bytes()).unwrap();
        assert_eq!(adj.num_nodes(), 5);
        assert_eq!(
            adj.bfs_distances(NodeId(0)),
            vec![Some(0), Some(1), Some(2), None, None]
        );
        assert!(AdjacencyMap::from_edge_list(0, "0 x\n".as_bytes()).is_err());
    }
}
