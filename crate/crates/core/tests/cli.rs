use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stepgrade")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Problem 4 of the fixture set, alone.
fn small_dataset(dir: &TempDir) -> PathBuf {
    let text = std::fs::read_to_string(fixture("dataset20.jsonl")).unwrap();
    let line = text.lines().nth(3).unwrap();
    let p = dir.path().join("small.jsonl");
    std::fs::write(&p, format!("{line}\n")).unwrap();
    p
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn validate_reports_and_sets_exit_code() {
    let ok = run(&["validate", "--dataset", path(&fixture("dataset20.jsonl"))]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    let report: Value = serde_json::from_str(&stdout(&ok)).unwrap();
    // problem 13 carries a derivative node that does not parse
    let p13 = report.as_array().unwrap().iter().find(|p| p["problem_id"] == 13).unwrap();
    assert_eq!(p13["unparseable"][0]["index"], 4);
    assert!(stderr(&ok).contains("20 problem(s), 0 with violations"));

    let dir = TempDir::new().unwrap();
    let bad = write(
        &dir,
        "bad.json",
        r#"{"id": 1, "grading_standard": [
            {"index": 1, "formula": "$$x = 1$$", "dependency": [2]},
            {"index": 2, "formula": "$$y = x$$", "dependency": [1], "is_final_answer": true}]}"#,
    );
    let out = run(&["validate", "--dataset", path(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report[0]["violations"][0]["kind"], "backward_edge");

    let broken = write(&dir, "broken.json", "{\"id\": 1, \"grading_standard\": [");
    let out = run(&["validate", "--dataset", path(&broken)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("error:"));

    let missing = run(&["validate", "--dataset", "/nonexistent.jsonl"]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(run(&["validate"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn grade_self_run() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("report.json");
    let out = run(&[
        "grade",
        "--dataset",
        path(&fixture("dataset20.jsonl")),
        "--candidates",
        path(&fixture("self_candidates.jsonl")),
        "--out",
        path(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stderr(&out).contains("graded 20 of 20 candidate(s)"));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let overall = &report["rollups"]["overall"];
    assert_eq!(overall["graded"], 20);
    assert_eq!(overall["step_mean"], 1.0);
    assert_eq!(overall["final_accuracy"], 0.95);
    assert_eq!(report["rollups"]["by_model"]["reference"]["mean_latency_s"], 1.5);
    assert_eq!(report["run_meta"]["seed"], 20250601);
    assert_eq!(report["per_problem"].as_array().unwrap().len(), 20);
}

#[test]
fn grade_failures() {
    let dir = TempDir::new().unwrap();
    let ds = small_dataset(&dir);
    let empty = write(&dir, "empty.jsonl", "");
    let out = run(&["grade", "--dataset", path(&ds), "--candidates", path(&empty)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("zero problems graded"));

    let unknown = write(&dir, "unknown.jsonl", r#"{"problem_id": 77, "solution": "$$x = 1$$"}"#);
    let out = run(&["grade", "--dataset", path(&ds), "--candidates", path(&unknown)]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["per_problem"][0]["error"], "unknown problem id 77");

    let cands = write(&dir, "c.jsonl", r#"{"problem_id": 4, "solution": "$$E = \\frac{k Q}{r^2}$$"}"#);
    let out = run(&["grade", "--dataset", path(&ds), "--candidates", path(&cands), "--n-succ", "50"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["grade", "--dataset", path(&ds), "--candidates", path(&cands), "--sample-range", "5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = TempDir::new().unwrap();
    small_dataset(&dir);
    write(
        &dir,
        "c.jsonl",
        r#"{"problem_id": 4, "model": "m", "solution": "$$E = \\frac{k Q}{r^2}$$", "latency_s": 3.0}"#,
    );
    let cfg = write(
        &dir,
        "run.toml",
        "dataset = \"small.jsonl\"\ncandidates = \"c.jsonl\"\nseed = 5\nformat = \"tsv\"\n[params]\nn_max = 30\n",
    );
    let out = run(&["grade", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let tsv = stdout(&out);
    assert!(tsv.starts_with("problem_id\tmodel\t"));
    assert!(tsv.contains("\n4\tm\tEasy\tElectromagnetism\t1/1\t"), "{tsv}");
    assert!(tsv.contains("overall\tall\t1\t1.000000\t"));

    let out = run(&["grade", "--config", path(&cfg), "--seed", "9", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["run_meta"]["seed"], 9);
    assert_eq!(report["run_meta"]["params"]["n_max"], 30);
    assert_eq!(report["run_meta"]["params"]["n_succ"], 10);

    let typo = write(&dir, "typo.toml", "datset = \"small.jsonl\"\n");
    assert_eq!(run(&["grade", "--config", path(&typo)]).status.code(), Some(2));
}

#[test]
fn stats_command() {
    let dir = TempDir::new().unwrap();
    let rows = |f: &dyn Fn(u32) -> u32| {
        (1..=10).map(|i| format!("{{\"id\": {i}, \"score_a\": {i}, \"score_b\": {}}}\n", f(i))).collect::<String>()
    };
    let concordant = write(&dir, "up.jsonl", &rows(&|i| i * 2));
    let out = run(&["stats", "--pairs", path(&concordant), "--n-perm", "2000"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("tau_b\tp_asymptotic\tp_permutation"));
    let vals: Vec<f64> = lines.next().unwrap().split('\t').map(|v| v.parse().unwrap()).collect();
    assert_eq!(vals[0], 1.0);
    assert!(vals[1] < 0.001 && vals[2] < 0.001);

    let reversed = write(&dir, "down.jsonl", &rows(&|i| 100 - i));
    let out = run(&["stats", "--pairs", path(&reversed), "--format", "json", "--n-perm", "500", "--seed", "3"]);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["tau_b"], -1.0);
    assert_eq!((v["n"].as_u64(), v["n_perm"].as_u64(), v["seed"].as_u64()), (Some(10), Some(500), Some(3)));
    let again = run(&["stats", "--pairs", path(&reversed), "--format", "json", "--n-perm", "500", "--seed", "3"]);
    assert_eq!(stdout(&out), stdout(&again));

    let flat = write(&dir, "flat.jsonl", &rows(&|_| 1));
    let out = run(&["stats", "--pairs", path(&flat)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("undefined result"));
    assert_eq!(run(&["stats", "--pairs", path(&concordant), "--n-perm", "0"]).status.code(), Some(2));
}

#[test]
fn annotate_command() {
    let dir = TempDir::new().unwrap();
    let ann = write(
        &dir,
        "ann.jsonl",
        "{\"problem_id\": 4, \"c1\": 1, \"c2\": 1}\n{\"problem_id\": 1001, \"c1\": 3, \"c2\": 3}\n",
    );
    let ds = fixture("dataset20.jsonl");
    let out = run(&["annotate", "--dataset", path(&ds), "--annotations", path(&ann), "--tau1", "0.5", "--tau2", "1.5"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let recs: Vec<Value> = stdout(&out).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(recs.len(), 2);
    // problem 4: layers of width 2 and 1
    assert!((recs[0]["e"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-12);
    assert_eq!(
        (recs[0]["c3"].as_u64(), recs[0]["S"].as_u64(), recs[0]["label"].as_str()),
        (Some(2), Some(4), Some("Easy"))
    );
    assert_eq!(recs[1]["label"], "Hard");

    let bad = write(&dir, "bad.jsonl", "{\"problem_id\": 4, \"c1\": 0, \"c2\": 1}\n");
    assert_eq!(run(&["annotate", "--dataset", path(&ds), "--annotations", path(&bad)]).status.code(), Some(1));
    let out = run(&["annotate", "--dataset", path(&ds), "--annotations", path(&ann), "--tau1", "2", "--tau2", "1"]);
    assert_eq!(out.status.code(), Some(2));
}
