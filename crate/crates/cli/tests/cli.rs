use std::path::Path;
use std::process::{Command, Output};

fn meshflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meshflow"))
        .args(args)
        .env_remove("MESHFLOW_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout_ok(args: &[&str]) -> String {
    let out = meshflow(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn line_value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).map(str::trim))
        .unwrap_or_else(|| panic!("no `{key}` line in:\n{text}"))
}

#[test]
fn run_and_reference_agree() {
    let common = ["--grid", "6,5", "--iters", "4", "--seed", "3"];
    let reference = stdout_ok(&[&["reference"][..], &common].concat());
    for mode in ["barrier", "dataflow"] {
        let run = stdout_ok(&[&["run", "--workers", "2", "--mode", mode][..], &common].concat());
        assert_eq!(line_value(&run, "checksum"), line_value(&reference, "checksum"));
        assert_eq!(line_value(&run, "rms"), line_value(&reference, "rms"));
        assert!(run.contains("tasks 20"));
    }
}

#[test]
fn mesh_gen_then_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.mesh");
    let p = path.to_str().unwrap();
    stdout_ok(&["mesh-gen", "--grid", "3,3", "--out", p]);
    let report = stdout_ok(&["mesh-check", p]);
    assert!(report.contains("set cells 9"));
    assert!(report.contains("set edges 12"));
    assert!(report.contains("set bedges 12"));
    assert!(report.contains("map pecell edges -> cells arity 2"));
    assert!(report.trim_end().ends_with("ok"));

    std::fs::write(&path, "sets 1\nmaps 0\ndats 0\nset s -1\n").unwrap();
    let out = meshflow(&["mesh-check", p]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
}

#[test]
fn bench_writes_rows_and_graph() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rows.csv");
    let json = dir.path().join("rows.json");
    let graph = dir.path().join("graph.json");
    stdout_ok(&[
        "bench",
        "--grid",
        "4,4",
        "--iters",
        "2",
        "--workers",
        "1,2",
        "--prefetch-distance",
        "0,3",
        "--reps",
        "3",
        "--out",
        csv.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
        "--graph-out",
        graph.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("schema_version,"));
    assert_eq!(lines.count(), 2 * 2 * 2);

    let rows: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let rows = rows["rows"].as_array().unwrap();
    assert!(rows.iter().all(|r| r["checksum"] == rows[0]["checksum"]));

    let g: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&graph).unwrap()).unwrap();
    assert_eq!(g["nodes"].as_array().unwrap().len(), 10);
    assert!(!g["edges"].as_array().unwrap().is_empty());
}

#[test]
fn bench_rejects_too_few_reps() {
    let out = meshflow(&["bench", "--grid", "2,2", "--iters", "1", "--reps", "2"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 3"));
}

#[test]
fn workers_default_from_env() {
    let out = Command::new(env!("CARGO_BIN_EXE_meshflow"))
        .args(["run", "--grid", "2,2", "--iters", "1"])
        .env("MESHFLOW_WORKERS", "3")
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&out.stdout).contains("workers 3"));
    assert!(Path::new(env!("CARGO_BIN_EXE_meshflow")).exists());
}

#[test]
fn fuzz_seed_arguments_parse() {
    use clap::Parser;
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/cli_args");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let bytes = std::fs::read(entry.unwrap().path()).unwrap();
        let s = String::from_utf8(bytes).unwrap();
        let args = std::iter::once("meshflow").chain(s.split('\0'));
        assert!(meshflow_cli::Cli::try_parse_from(args).is_ok(), "{s:?}");
        n += 1;
    }
    assert!(n >= 4);
}
