//! Random source selection.

use ife_core::{CsrGraph, NodeId};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::BenchError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WorkloadSpec {
    pub num_sources: usize,
    pub seed: u64,
    /// Every source must reach some node at least this many hops away.
    pub min_reach_depth: u32,
    pub repetitions: usize,
    pub warmup: usize,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            num_sources: 1,
            seed: 1,
            min_reach_depth: 3,
            repetitions: 3,
            warmup: 1,
        }
    }
}

impl WorkloadSpec {
    pub fn sources(num_sources: usize, seed: u64) -> Self {
        Self {
            num_sources,
            seed,
            ..Self::default()
        }
    }
}

/// Draws distinct sources in seeded random order, keeping those whose probe
/// BFS reaches `min_reach_depth`.
pub fn generate_sources(g: &CsrGraph, spec: &WorkloadSpec) -> Result<Vec<NodeId>, BenchError> {
    let mut candidates: Vec<NodeId> = g.nodes().collect();
    candidates.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let mut probe = DepthProbe::new(g.num_nodes());
    let mut picked = Vec::with_capacity(spec.num_sources);
    for v in candidates {
        if picked.len() == spec.num_sources {
            break;
        }
        if probe.reaches(g, v, spec.min_reach_depth) {
            picked.push(v);
        }
    }
    if picked.len() < spec.num_sources {
        return Err(BenchError::Workload(format!(
            "only {} of {} nodes reach depth {}, {} sources requested",
            picked.len(),
            g.num_nodes(),
            spec.min_reach_depth,
            spec.num_sources
        )));
    }
    Ok(picked)
}

/// Reusable BFS that stops as soon as the target depth is reached.
struct DepthProbe {
    stamp: Vec<u32>,
    round: u32,
    level: Vec<NodeId>,
    next: Vec<NodeId>,
}

impl DepthProbe {
    fn new(n: usize) -> Self {
        Self {
            stamp: vec![0; n],
            round: 0,
            level: Vec::new(),
            next: Vec::new(),
        }
    }

    fn reaches(&mut self, g: &CsrGraph, src: NodeId, depth: u32) -> bool {
        self.round += 1;
        let round = self.round;
        self.level.clear();
        self.level.push(src);
        self.stamp[src.index()] = round;
        for _ in 0..depth {
            self.next.clear();
            for &u in &self.level {
                for &v in g.neighbors(u) {
                    if self.stamp[v.index()] != round {
                        self.stamp[v.index()] = round;
                        self.next.push(v);
                    }
                }
            }
            if self.next.is_empty() {
                return false;
            }
            std::mem::swap(&mut self.level, &mut self.next);
        }
        true
    }
}
