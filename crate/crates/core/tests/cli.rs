use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_latcount"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const BOX3: &str = "# [0,9]^3\n6 3\n1 0 0 9\n-1 0 0 0\n0 1 0 9\n0 -1 0 0\n0 0 1 9\n0 0 -1 0\n";
const TRIANGLE: &str = "3 2\n-1 0 0\n0 -1 0\n1 1 2\n";

#[test]
fn count_box_json() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "box3.poly", BOX3);
    let o = run(&["count", f.to_str().unwrap(), "--seed", "7", "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let est = v["estimate"].as_f64().unwrap();
    assert!((800.0..=1200.0).contains(&est));
    for key in [
        "r",
        "v",
        "levels",
        "rounds",
        "total_samples",
        "chain_length",
        "rect_count",
        "diagnostics",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["config"]["seed"], 7);
    assert_eq!(v["config"]["s"], 500);
}

#[test]
fn count_text_output() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "t.poly", TRIANGLE);
    let o = run(&["count", f.to_str().unwrap(), "--epsilon", "0.5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for key in [
        "estimate:",
        "r:",
        "v:",
        "chain length:",
        "samples:",
        "time:",
    ] {
        assert!(text.contains(key), "{text}");
    }
}

#[test]
fn exact_box() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "box3.poly", BOX3);
    let o = run(&["exact", f.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "1000\n");
    let o = run(&["exact", f.to_str().unwrap(), "--limit", "999"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("limit"));
}

#[test]
fn exact_dump_points() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "t.poly", TRIANGLE);
    let o = run(&["exact", f.to_str().unwrap(), "--dump-points"]);
    assert_eq!(stdout(&o), "6\n0 0\n0 1\n0 2\n1 0\n1 1\n2 0\n");
}

#[test]
fn dense_matrix_input() {
    let dir = tempfile::tempdir().unwrap();
    // b −a per row
    let f = write(dir.path(), "t.hrep", "3 3\n0 1 0\n0 0 1\n2 -1 -1\n");
    let o = run(&["exact", f.to_str().unwrap(), "--format", "dense-matrix"]);
    assert_eq!(stdout(&o), "6\n", "{}", stderr(&o));
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "u.poly", "2 2\n1 0 3\n-1 0 0\n");
    let o = run(&["count", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unbounded"));

    let f = write(dir.path(), "z.poly", "2 2\n1 0 3\n0 0 1\n");
    let o = run(&["exact", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = run(&["exact", dir.path().join("missing.poly").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["count"]).status.code(), Some(1));
    assert_eq!(
        run(&["count", "x.poly", "--epsilon", "abc"]).status.code(),
        Some(1)
    );
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "t.poly", TRIANGLE);
    let o = run(&["count", f.to_str().unwrap(), "--s", "505"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn caps_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "t.poly", TRIANGLE);
    let o = run(&[
        "count",
        f.to_str().unwrap(),
        "--epsilon",
        "0.01",
        "--s",
        "20",
        "--max-rounds",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("round"), "{}", stderr(&o));
}

#[test]
fn empty_body_hits_the_rejection_cap() {
    let dir = tempfile::tempdir().unwrap();
    // 0.2 ≤ x + y ≤ 0.8 inside [-1, 2]²: a strip between lattice diagonals
    let f = write(
        dir.path(),
        "e.poly",
        "6 2\n1 1 0.8\n-1 -1 -0.2\n1 0 2\n-1 0 1\n0 1 2\n0 -1 1\n",
    );
    let o = run(&["count", f.to_str().unwrap(), "--max-attempts", "2000"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("indistinguishable from zero"));
    assert_eq!(stdout(&run(&["exact", f.to_str().unwrap()])), "0\n");
}

#[test]
fn json_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "t.poly", TRIANGLE);
    let args = ["count", f.to_str().unwrap(), "--seed", "5", "--json"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = run(&[
        "count",
        f.to_str().unwrap(),
        "--seed",
        "5",
        "--json",
        "--threads",
        "3",
    ]);
    let strip = |o: &Output| {
        let mut v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        v["config"]["threads"] = 0.into();
        v
    };
    assert_eq!(strip(&a), strip(&c));
}

#[test]
fn sample_prints_points_of_the_body() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "t.poly", TRIANGLE);
    let o = run(&[
        "sample",
        f.to_str().unwrap(),
        "--count",
        "50",
        "--seed",
        "2",
    ]);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 50);
    for line in text.lines() {
        let xy: Vec<i64> = line.split(' ').map(|t| t.parse().unwrap()).collect();
        assert!(xy[0] >= 0 && xy[1] >= 0 && xy[0] + xy[1] <= 2, "{line}");
    }
    let again = run(&[
        "sample",
        f.to_str().unwrap(),
        "--count",
        "50",
        "--seed",
        "2",
    ]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn gen_random_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.poly");
    let o = run(&[
        "gen",
        "random",
        "--m",
        "5",
        "--n",
        "5",
        "--lambda",
        "8",
        "--seed",
        "1",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let golden = std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/random_m5_n5_l8_seed1.poly"),
    )
    .unwrap();
    assert_eq!(std::fs::read_to_string(&out).unwrap(), golden);
}

#[test]
fn gen_thinrect_axis_aligned_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.poly");
    let o = run(&[
        "gen",
        "thinrect",
        "--n",
        "2",
        "--tau",
        "3",
        "--axis-aligned",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&run(&["exact", out.to_str().unwrap()])), "14007\n");
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"epsilon": 0.5, "delta": 0.1, "s": 80}"#,
    );
    let csv = dir.path().join("report.csv");
    let json = dir.path().join("report.json");
    let o = run(&[
        "bench",
        "--family",
        "thinrect",
        "--config",
        cfg.to_str().unwrap(),
        "--repeats",
        "1",
        "-o",
        csv.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "instance_id,seed,run_idx,exact_count,estimate,rel_error,within_bound,rounds,total_samples,chain_length,wall_ms"
    );
    assert_eq!(lines.count(), 6);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["runs"].as_array().unwrap().len(), 6);
}
