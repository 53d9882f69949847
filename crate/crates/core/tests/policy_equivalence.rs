use std::collections::BTreeMap;

use ife_core::oracle::AdjacencyMap;
use ife_core::{
    generate_random_graph, run_query, CsrGraph, DispatchPolicy, LengthRow, MorselSizes, NodeId,
    QuerySpec, ReturnMode,
};
use proptest::prelude::*;

fn policies() -> Vec<DispatchPolicy> {
    vec![
        DispatchPolicy::one_thread_one_source(),
        DispatchPolicy::shared_one_source(),
        DispatchPolicy::shared_k_sources(1),
        DispatchPolicy::shared_k_sources(4),
        DispatchPolicy::shared_k_sources(32),
        DispatchPolicy::shared_k_multi_source(1),
        DispatchPolicy::shared_k_multi_source(2),
    ]
}

fn expected_lengths(g: &CsrGraph, sources: &[NodeId]) -> Vec<LengthRow> {
    let adj = AdjacencyMap::from_graph(g).unwrap();
    let mut rows = Vec::new();
    for &s in sources {
        for (d, dist) in adj.bfs_distances(s).into_iter().enumerate() {
            if let Some(l) = dist {
                rows.push(LengthRow {
                    source: s,
                    destination: NodeId(d as u32),
                    length: l as u8,
                });
            }
        }
    }
    rows.sort_unstable();
    rows
}

type PathSets = BTreeMap<(NodeId, NodeId), Vec<Vec<NodeId>>>;

fn expected_paths(g: &CsrGraph, sources: &[NodeId]) -> PathSets {
    let adj = AdjacencyMap::from_graph(g).unwrap();
    let mut out = PathSets::new();
    for &s in sources {
        for (d, paths) in adj.all_shortest_paths_from(s).unwrap() {
            out.entry((s, d)).or_default().extend(paths);
        }
    }
    for v in out.values_mut() {
        v.sort();
    }
    out
}

fn graph_strategy() -> impl Strategy<Value = (CsrGraph, Vec<NodeId>)> {
    (1usize..60, 0.0f64..4.0, any::<u64>(), 1usize..12).prop_map(|(n, deg, seed, k)| {
        let g = generate_random_graph(n, deg, seed).unwrap();
        let sources = (0..k)
            .map(|i| NodeId(((i * 7 + seed as usize) % n) as u32))
            .collect();
        (g, sources)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lengths_match_bfs((g, sources) in graph_strategy(), threads in 1usize..5, morsel in 1usize..9) {
        let want = expected_lengths(&g, &sources);
        for policy in policies() {
            let spec = QuerySpec::new(&g, sources.clone())
                .policy(policy)
                .threads(threads)
                .morsel_sizes(MorselSizes::uniform(morsel))
                .output_chunk(morsel + 2);
            let res = run_query(&spec).unwrap();
            prop_assert_eq!(res.lengths(), want.as_slice(), "{}", policy);
        }
    }

    #[test]
    fn paths_match_brute_force((g, sources) in graph_strategy(), threads in 1usize..5) {
        let want = expected_paths(&g, &sources);
        for policy in policies() {
            let spec = QuerySpec::new(&g, sources.clone())
                .policy(policy)
                .threads(threads)
                .return_mode(ReturnMode::Paths)
                .morsel_sizes(MorselSizes::uniform(3));
            let res = run_query(&spec).unwrap();
            let mut got = PathSets::new();
            for row in res.paths() {
                prop_assert!(row.path.is_walk_in(&g));
                got.entry((row.source, row.destination)).or_default().push(row.path.nodes.clone());
            }
            for v in got.values_mut() {
                v.sort();
            }
            prop_assert_eq!(&got, &want, "{}", policy);
        }
    }
}

#[test]
fn undirected_graphs_agree_across_policies() {
    let text: String = (0..40u32)
        .map(|i| format!("{} {}\n", i, (i * 7 + 3) % 40))
        .collect();
    let g =
        ife_core::load_edge_list(text.as_bytes(), ife_core::LoadOptions::directed(false)).unwrap();
    let sources: Vec<NodeId> = (0..10).map(|i| NodeId(i * 4)).collect();
    let lengths = expected_lengths(&g, &sources);
    let paths = expected_paths(&g, &sources);
    for policy in policies() {
        for threads in [1, 4] {
            let base = QuerySpec::new(&g, sources.clone())
                .policy(policy)
                .threads(threads);
            assert_eq!(run_query(&base).unwrap().lengths(), lengths.as_slice());
            let res = run_query(&base.clone().return_mode(ReturnMode::Paths)).unwrap();
            let mut got = PathSets::new();
            for row in res.paths() {
                got.entry((row.source, row.destination))
                    .or_default()
                    .push(row.path.nodes.clone());
            }
            for v in got.values_mut() {
                v.sort();
            }
            assert_eq!(got, paths, "{policy} x{threads}");
        }
    }
}

#[test]
fn path_rows_are_identical_across_policies() {
    let g = generate_random_graph(50, 3.0, 77).unwrap();
    let sources: Vec<NodeId> = (0..20).map(NodeId).collect();
    let reference = run_query(
        &QuerySpec::new(&g, sources.clone())
            .return_mode(ReturnMode::Paths)
            .max_paths(Some(2)),
    )
    .unwrap();
    for policy in policies() {
        for threads in [1, 3] {
            let spec = QuerySpec::new(&g, sources.clone())
                .policy(policy)
                .threads(threads)
                .return_mode(ReturnMode::Paths)
                .max_paths(Some(2))
                .morsel_sizes(MorselSizes::uniform(4));
            assert_eq!(
                run_query(&spec).unwrap().rows,
                reference.rows,
                "{policy} x{threads}"
            );
        }
    }
}
