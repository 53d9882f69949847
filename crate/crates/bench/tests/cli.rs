use std::path::Path;
use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ife-bench"))
        .args(args)
        .output()
        .unwrap()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(Result::unwrap)
        .collect()
}

#[test]
fn random_grid_with_verify_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("report.csv");
    let svg_path = dir.path().join("speedup.svg");
    let out = bench(&[
        "--random",
        "2000:4:7",
        "--policy",
        "1t1s,nt1s,ntks,ntkms",
        "--k",
        "2",
        "--threads",
        "1,2",
        "--sources",
        "8",
        "--reps",
        "2",
        "--warmup",
        "1",
        "--verify",
        "--csv",
        csv_path.to_str().unwrap(),
        "--svg",
        svg_path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(&csv_path);
    let cells: Vec<_> = rows.iter().filter(|r| &r[0] == "cell").collect();
    assert_eq!(cells.len(), 8);
    assert!(cells.iter().all(|r| &r[7] == "ok"));
    assert_eq!(rows.iter().filter(|r| &r[0] == "warmup").count(), 8);
    assert_eq!(rows.iter().filter(|r| &r[0] == "run").count(), 16);
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 4);
}

#[test]
fn edge_list_paths_with_source_and_destination_files() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("diamond.txt");
    std::fs::write(&graph, "# diamond with a tail\n0 1\n0 2\n1 3\n2 3\n3 4\n").unwrap();
    let sources = dir.path().join("sources.txt");
    std::fs::write(&sources, "0\n").unwrap();
    let dests = dir.path().join("dests.txt");
    std::fs::write(&dests, "3 4").unwrap();
    let csv_path = dir.path().join("r.csv");
    let out = bench(&[
        "--graph",
        graph.to_str().unwrap(),
        "--source-file",
        sources.to_str().unwrap(),
        "--dest-file",
        dests.to_str().unwrap(),
        "--return",
        "paths",
        "--reps",
        "1",
        "--warmup",
        "0",
        "--verify",
        "--level-table",
        "--csv",
        csv_path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(&csv_path);
    // Two shortest paths to 3 and two to 4.
    assert_eq!(&rows[0][8], "4");
    assert_eq!(&rows[0][1], "diamond");
    assert_eq!(&rows[0][15], "1;2;1;1");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("total"), "{stdout}");
}

#[test]
fn failed_cell_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("chain.txt");
    let text: String = (0..299).map(|i| format!("{i} {}\n", i + 1)).collect();
    std::fs::write(&graph, text).unwrap();
    let sources = dir.path().join("s.txt");
    std::fs::write(&sources, "0").unwrap();
    let out = bench(&[
        "--graph",
        graph.to_str().unwrap(),
        "--source-file",
        sources.to_str().unwrap(),
        "--reps",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("depth"));
}

#[test]
fn usage_and_input_errors_exit_with_two() {
    assert_eq!(bench(&[]).status.code(), Some(2));
    assert_eq!(
        bench(&["--random", "10:2:1", "--policy", "fastest"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(bench(&["--random", "10:2"]).status.code(), Some(2));
    assert_eq!(
        bench(&["--graph", "/nonexistent/graph.txt"]).status.code(),
        Some(2)
    );
    // A star has no source reaching three levels.
    let dir = tempfile::tempdir().unwrap();
    let star = dir.path().join("star.txt");
    std::fs::write(&star, "0 1\n0 2\n0 3\n").unwrap();
    assert_eq!(
        bench(&["--graph", star.to_str().unwrap(), "--sources", "1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn snapshot_input_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.snap");
    let g = ife_core::generate_random_graph(300, 3.0, 2).unwrap();
    g.write_snapshot(std::fs::File::create(&path).unwrap())
        .unwrap();
    let out = bench(&[
        "--graph",
        path.to_str().unwrap(),
        "--sources",
        "2",
        "--reps",
        "1",
        "--verify",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn single_thread_csv_is_deterministic_outside_timings() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let p = dir.path().join(name);
        let out = bench(&[
            "--random",
            "1500:5:3",
            "--policy",
            "ntks,ntkms",
            "--sources",
            "16",
            "--csv",
            p.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        let mut rdr = csv::Reader::from_path(&p).unwrap();
        let header = rdr.headers().unwrap().clone();
        let keep: Vec<usize> = (0..header.len())
            .filter(|&i| !ife_bench::grid::TIMING_COLUMNS.contains(&&header[i]))
            .collect();
        rdr.records()
            .map(|r| {
                let r = r.unwrap();
                keep.iter().map(|&i| r[i].to_string()).collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}
