use std::time::Duration;

use ife_bench::chart::render_speedup_chart;
use ife_bench::grid::{BenchReport, CellSummary, RunStatus};
use ife_core::{DispatchPolicy, ReturnMode};

fn cell(policy: DispatchPolicy, threads: usize, mean_ms: u64) -> CellSummary {
    CellSummary {
        dataset: "rmat".into(),
        policy,
        threads,
        return_mode: ReturnMode::Lengths,
        runs: 3,
        mean: Duration::from_millis(mean_ms),
        min: Duration::from_millis(mean_ms),
        max: Duration::from_millis(mean_ms),
        deviation: 0.0,
        status: RunStatus::Ok,
    }
}

fn four_policy_report() -> BenchReport {
    let grid: [(DispatchPolicy, [u64; 4]); 4] = [
        (
            DispatchPolicy::one_thread_one_source(),
            [800, 800, 800, 800],
        ),
        (DispatchPolicy::shared_one_source(), [800, 500, 320, 250]),
        (DispatchPolicy::shared_k_sources(32), [800, 400, 200, 100]),
        (
            DispatchPolicy::shared_k_multi_source(2),
            [400, 250, 160, 125],
        ),
    ];
    let cells = grid
        .iter()
        .flat_map(|(p, means)| {
            [1, 2, 4, 8]
                .into_iter()
                .zip(means)
                .map(|(t, &m)| cell(*p, t, m))
        })
        .collect();
    BenchReport {
        runs: vec![],
        cells,
    }
}

#[test]
fn four_policy_grid_matches_golden_file() {
    let svg = render_speedup_chart(&four_policy_report()).unwrap();
    let golden_path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/golden/speedup_4policy.svg"
    );
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(golden_path, &svg).unwrap();
    }
    let golden = std::fs::read_to_string(golden_path).unwrap();
    assert_eq!(svg, golden);
}

#[test]
fn golden_coordinates_match_hand_computed_speedups() {
    // Plot area x in [60, 470], y in [20, 350]; speedups 1..8 on an 8-unit axis.
    // ntks(k=32): speedups 1, 2, 4, 8 at threads 1, 2, 4, 8 (ordinal x positions).
    let svg = render_speedup_chart(&four_policy_report()).unwrap();
    let y = |s: f64| 20.0 + 330.0 * (1.0 - s / 8.0);
    let x = |i: f64| 60.0 + 410.0 * i / 3.0;
    let ntks = format!(
        "points=\"{:.1},{:.1} {:.1},{:.1} {:.1},{:.1} {:.1},{:.1}\"",
        x(0.0),
        y(1.0),
        x(1.0),
        y(2.0),
        x(2.0),
        y(4.0),
        x(3.0),
        y(8.0)
    );
    assert!(svg.contains(&ntks), "{ntks}\n{svg}");
    // 1t1s stays flat at speedup 1.
    let flat = format!(
        "points=\"{:.1},{y1:.1} {:.1},{y1:.1} {:.1},{y1:.1} {:.1},{y1:.1}\"",
        x(0.0),
        x(1.0),
        x(2.0),
        x(3.0),
        y1 = y(1.0)
    );
    assert!(svg.contains(&flat));
    assert_eq!(svg.matches("<polyline").count(), 4);
}

#[test]
fn rendering_is_byte_stable() {
    let a = render_speedup_chart(&four_policy_report()).unwrap();
    let b = render_speedup_chart(&four_policy_report()).unwrap();
    assert_eq!(a, b);
}
