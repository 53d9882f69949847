//! Checks query results against the serial reference search.

use std::collections::{BTreeMap, HashSet};

use ife_core::oracle::{AdjacencyMap, MAX_BRUTE_FORCE_NODES};
use ife_core::{serial_ife_oracle, CsrGraph, LengthRow, NodeId, QueryResult, ReturnMode};

/// What a result is checked against.
#[derive(Clone, Copy, Debug)]
pub struct Expectation<'a> {
    pub sources: &'a [NodeId],
    pub destinations: Option<&'a [bool]>,
    pub mode: ReturnMode,
    pub max_paths: Option<usize>,
}

/// `Ok` when `result` equals the reference exactly, else a description of the
/// first difference.
pub fn verify_result(
    g: &CsrGraph,
    expect: &Expectation<'_>,
    result: &QueryResult,
) -> Result<(), String> {
    match expect.mode {
        ReturnMode::Lengths => verify_lengths(g, expect, result.lengths()),
        ReturnMode::Paths => verify_paths(g, expect, result),
    }
}

fn selected(expect: &Expectation<'_>, d: usize) -> bool {
    expect.destinations.is_none_or(|m| m[d])
}

fn verify_lengths(g: &CsrGraph, expect: &Expectation<'_>, got: &[LengthRow]) -> Result<(), String> {
    let mut want = Vec::new();
    for &s in expect.sources {
        let oracle = serial_ife_oracle(g, s);
        for (d, dist) in oracle.dist.iter().enumerate() {
            if let (Some(l), true) = (dist, selected(expect, d)) {
                want.push(LengthRow {
                    source: s,
                    destination: NodeId(d as u32),
                    length: *l as u8,
                });
            }
        }
    }
    want.sort_unstable();
    if want.len() != got.len() {
        return Err(format!(
            "expected {} length rows, got {}",
            want.len(),
            got.len()
        ));
    }
    match want.iter().zip(got).find(|(w, g)| w != g) {
        Some((w, g)) => Err(format!(
            "expected ({}, {}, {}), got ({}, {}, {})",
            w.source, w.destination, w.length, g.source, g.destination, g.length
        )),
        None => Ok(()),
    }
}

fn verify_paths(
    g: &CsrGraph,
    expect: &Expectation<'_>,
    result: &QueryResult,
) -> Result<(), String> {
    let cap = expect.max_paths.unwrap_or(usize::MAX);
    let mut groups: BTreeMap<(NodeId, NodeId), Vec<&ife_core::Path>> = BTreeMap::new();
    for row in result.paths() {
        groups
            .entry((row.source, row.destination))
            .or_default()
            .push(&row.path);
    }
    let mut want_counts: BTreeMap<(NodeId, NodeId), u128> = BTreeMap::new();
    for &s in expect.sources {
        let oracle = serial_ife_oracle(g, s);
        let counts = count_shortest_paths(&oracle, s);
        for (d, c) in counts.iter().enumerate() {
            if *c > 0 && selected(expect, d) {
                *want_counts.entry((s, NodeId(d as u32))).or_default() += (*c).min(cap as u128);
            }
        }
        for ((src, dst), paths) in groups.range((s, NodeId(0))..=(s, NodeId(u32::MAX))) {
            let dist =
                oracle.dist[dst.index()].ok_or_else(|| format!("{src}->{dst} is unreachable"))?;
            for p in paths {
                if p.nodes.first() != Some(src) || p.nodes.last() != Some(dst) {
                    return Err(format!("path for {src}->{dst} has wrong endpoints"));
                }
                if p.len() != dist as usize || !p.is_walk_in(g) {
                    return Err(format!("path for {src}->{dst} is not a shortest walk"));
                }
                for (i, e) in p.edges.iter().enumerate() {
                    let next = p.nodes[i + 1];
                    if oracle.parents[next.index()]
                        .binary_search(&(p.nodes[i], *e))
                        .is_err()
                    {
                        return Err(format!("edge {e} into {next} skips a level"));
                    }
                }
            }
            let distinct: HashSet<_> = paths.iter().collect();
            if distinct.len() != paths.len()
                && expect.sources.iter().filter(|&&x| x == *src).count() == 1
            {
                return Err(format!("duplicate paths for {src}->{dst}"));
            }
        }
    }
    let got_counts: BTreeMap<(NodeId, NodeId), u128> =
        groups.iter().map(|(k, v)| (*k, v.len() as u128)).collect();
    if got_counts != want_counts {
        let diff = want_counts
            .iter()
            .find(|(k, v)| got_counts.get(k) != Some(v))
            .map(|(k, v)| {
                format!(
                    "{}->{}: expected {v} paths, got {:?}",
                    k.0,
                    k.1,
                    got_counts.get(k)
                )
            })
            .unwrap_or_else(|| "unexpected extra pairs".into());
        return Err(diff);
    }
    if expect.max_paths.is_none() && g.num_nodes() <= MAX_BRUTE_FORCE_NODES {
        verify_exhaustively(g, expect, &groups)?;
    }
    Ok(())
}

/// Number of distinct shortest edge sequences from `src` to every node.
fn count_shortest_paths(oracle: &ife_core::engine::SerialIfe, src: NodeId) -> Vec<u128> {
    let mut order: Vec<usize> = (0..oracle.dist.len())
        .filter(|&v| oracle.dist[v].is_some())
        .collect();
    order.sort_by_key(|&v| oracle.dist[v]);
    let mut count = vec![0u128; oracle.dist.len()];
    count[src.index()] = 1;
    for v in order {
        if v == src.index() {
            continue;
        }
        count[v] = oracle.parents[v]
            .iter()
            .fold(0u128, |acc, (p, _)| acc.saturating_add(count[p.index()]));
    }
    count
}

fn verify_exhaustively(
    g: &CsrGraph,
    expect: &Expectation<'_>,
    groups: &BTreeMap<(NodeId, NodeId), Vec<&ife_core::Path>>,
) -> Result<(), String> {
    let adj = AdjacencyMap::from_graph(g).map_err(|e| e.to_string())?;
    for &s in expect.sources {
        let reps = expect.sources.iter().filter(|&&x| x == s).count();
        for (d, paths) in adj.all_shortest_paths_from(s).map_err(|e| e.to_string())? {
            if !selected(expect, d.index()) {
                continue;
            }
            let mut want: Vec<Vec<NodeId>> =
                paths.iter().flat_map(|p| vec![p.clone(); reps]).collect();
            want.sort();
            let mut got: Vec<Vec<NodeId>> = groups
                .get(&(s, d))
                .map(|ps| ps.iter().map(|p| p.nodes.clone()).collect())
                .unwrap_or_default();
            got.sort();
            if got != want {
                return Err(format!(
                    "path set for {s}->{d} differs from exhaustive enumeration"
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ife_core::{generate_random_graph, run_query, DispatchPolicy, QuerySpec, Rows};

    #[test]
    fn accepts_engine_results() {
        let g = generate_random_graph(300, 3.0, 8).unwrap();
        let sources = vec![NodeId(1), NodeId(2), NodeId(2)];
        for mode in [ReturnMode::Lengths, ReturnMode::Paths] {
            for cap in [None, Some(1)] {
                let spec = QuerySpec::new(&g, sources.clone())
                    .return_mode(mode)
                    .max_paths(cap)
                    .policy(DispatchPolicy::shared_k_sources(2))
                    .threads(2);
                let res = run_query(&spec).unwrap();
                let expect = Expectation {
                    sources: &sources,
                    destinations: None,
                    mode,
                    max_paths: cap,
                };
                verify_result(&g, &expect, &res).unwrap();
            }
        }
    }

    #[test]
    fn rejects_tampered_results() {
        let g = generate_random_graph(40, 2.0, 3).unwrap();
        let sources = vec![NodeId(0)];
        let spec = QuerySpec::new(&g, sources.clone()).return_mode(ReturnMode::Paths);
        let mut res = run_query(&spec).unwrap();
        let expect = Expectation {
            sources: &sources,
            destinations: None,
            mode: ReturnMode::Paths,
            max_paths: None,
        };
        verify_result(&g, &expect, &res).unwrap();
        if let Rows::Paths(rows) = &mut res.rows {
            let victim = rows.iter().position(|r| !r.path.is_empty()).unwrap();
            rows.remove(victim);
        }
        assert!(verify_result(&g, &expect, &res).is_err());

        let spec = QuerySpec::new(&g, sources.clone());
        let mut res = run_query(&spec).unwrap();
        if let Rows::Lengths(rows) = &mut res.rows {
            rows.last_mut().unwrap().length += 1;
        }
        let expect = Expectation {
            mode: ReturnMode::Lengths,
            ..expect
        };
        assert!(verify_result(&g, &expect, &res).is_err());
    }
}
