use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn methodlint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_methodlint"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = methodlint(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn lines(path: impl AsRef<Path>) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn printer_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/printer")
}

#[test]
fn extract_printer() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.jsonl");
    let res = ok(&["extract", "--src", s(&printer_dir()), "--out", s(&out)]);
    let units = lines(&out);
    assert_eq!(units.len(), 1);
    assert_eq!(units[0]["project"], "printer");
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("run config: {"), "{stderr}");
    assert!(stderr.contains(r#""subcommand":"extract""#));
}

#[test]
fn no_arguments_is_usage_error() {
    let out = methodlint(&[]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout) + String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("Usage:"));
    assert_eq!(methodlint(&["extract", "--nope"]).status.code(), Some(1));
    assert_eq!(methodlint(&["--help"]).status.code(), Some(0));
}

#[test]
fn eval_length_mismatch_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let preds = dir.path().join("p.jsonl");
    let data = dir.path().join("d.jsonl");
    let pred = |id: &str| json!({"sample_id": id, "scores": {"has-issue": 0.9, "no-issue": 0.1}, "decided_labels": ["has-issue"]});
    let sample = |id: &str| json!({"id": id, "project": "p", "in_csn": false, "split": "TEST", "labels": ["S8"], "text_ref": ""});
    std::fs::write(&preds, format!("{}\n{}\n", pred("a"), pred("b"))).unwrap();
    std::fs::write(&data, format!("{}\n{}\n{}\n", sample("a"), sample("b"), sample("c"))).unwrap();
    let out = methodlint(&[
        "eval", "--preds", s(&preds), "--dataset", s(&data), "--task", "binary", "--out", s(&dir.path().join("r.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("2 predictions for 3 ground-truth samples"));
}

#[test]
fn corpus_from_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path();
    let rec = |name: &str, date: &str| json!({"full_name": name, "clone_url": format!("https://example.org/{name}.git"), "source": "API_SEARCH", "in_csn": false, "has_root_pom": false, "last_commit_date": date});
    let info = |name: &str, pom: bool| json!({"full_name": name, "public": true, "has_root_pom": pom, "clone_url": format!("https://example.org/{name}.git"), "last_commit_date": "2023-02-01"});
    let search = [rec("a/one", "2023-01-05"), rec("b/two", "2023-02-10"), rec("seed/x", "2023-03-01"), rec("c/three", "2023-03-02")];
    let repos = [info("a/one", true), info("b/two", false), info("seed/x", true), info("c/three", true), info("seed/y", true)];
    let join = |v: &[Value]| v.iter().map(|x| x.to_string() + "\n").collect::<String>();
    std::fs::write(fx.join("search.jsonl"), join(&search)).unwrap();
    std::fs::write(fx.join("repos.jsonl"), join(&repos)).unwrap();
    std::fs::write(fx.join("seeds.txt"), "# seeds\nseed/x\nseed/y\nseed/gone\n").unwrap();
    let out = fx.join("candidates.jsonl");
    ok(&[
        "corpus", "--seeds", s(&fx.join("seeds.txt")), "--fixture", s(fx), "--start", "2023-01-01", "--end", "2023-03-31",
        "--out", s(&out),
    ]);
    let got: Vec<(String, String)> = lines(&out)
        .iter()
        .map(|r| (r["full_name"].as_str().unwrap().to_string(), r["source"].as_str().unwrap().to_string()))
        .collect();
    let want = [("a/one", "API_SEARCH"), ("c/three", "API_SEARCH"), ("seed/x", "SEED_LIST"), ("seed/y", "SEED_LIST")];
    assert_eq!(got, want.map(|(a, b)| (a.to_string(), b.to_string())));
}

/// One project whose methods calling `riskyCall` carry an S8 finding and
/// whose methods logging through `System.out` carry an I5 finding.
fn synthetic_workspace(root: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let proj = root.join("projects/demo");
    std::fs::create_dir_all(proj.join("src")).unwrap();
    let mut java = String::from("public class Gen {\n");
    let mut issues = String::new();
    for i in 0..300 {
        let line = 2 + 3 * i;
        let body = match i % 5 {
            0 => {
                writeln!(issues, r#"{{"tool":"SPOTBUGS","type_id":"S8","path":"src/Gen.java","line":{},"project":"demo"}}"#, line + 1).unwrap();
                "riskyCall(null);".to_string()
            }
            1 => {
                writeln!(issues, r#"{{"tool":"INFER","type_id":"I5","path":"src/Gen.java","line":{},"project":"demo"}}"#, line + 1).unwrap();
                format!("System.out.println(\"value {i}\");")
            }
            _ => format!("int v{i} = {i} + counter;"),
        };
        writeln!(java, "  void m{i}() {{\n    {body}\n  }}").unwrap();
    }
    java.push_str("}\n");
    std::fs::write(proj.join("src/Gen.java"), java).unwrap();
    let issues_path = root.join("issues.jsonl");
    std::fs::write(&issues_path, issues).unwrap();
    let runs = root.join("runs.jsonl");
    let run = |tool: &str, secs: f64| {
        json!({"project": "demo", "tool": tool, "java_version": 8, "pom_path": "pom.xml", "status": "OK", "duration_seconds": secs, "attempts": []})
    };
    std::fs::write(&runs, format!("{}\n{}\n", run("INFER", 51.395), run("SPOTBUGS", 27.203))).unwrap();
    (root.join("projects"), issues_path, runs)
}

#[test]
fn end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let (projects, issues, runs) = synthetic_workspace(root);
    let p = |name: &str| root.join(name).to_str().unwrap().to_string();

    ok(&["extract", "--projects-dir", s(&projects), "--out", &p("units.jsonl")]);
    assert_eq!(lines(p("units.jsonl")).len(), 300);

    ok(&["transform", "--units", &p("units.jsonl"), "--format", "RC+RJ+RS", "--out", &p("rs.jsonl")]);
    let formatted = lines(p("rs.jsonl"));
    assert!(formatted[1]["text"].as_str().unwrap().contains("<stringliteral>"));

    ok(&[
        "build-dataset", "--units", &p("units.jsonl"), "--issues", s(&issues), "--runs", s(&runs),
        "--threshold", "mincount:1", "--balance-seed", "7", "--split-seed", "11",
        "--out", &p("dataset.jsonl"), "--manifest", &p("manifest.json"),
        "--run-manifest", &p("run.json"),
    ]);
    let dataset = lines(p("dataset.jsonl"));
    assert_eq!(dataset.len(), 240);
    let run_cfg: Value = serde_json::from_str(&std::fs::read_to_string(p("run.json")).unwrap()).unwrap();
    assert_eq!(run_cfg["command"]["balance_seed"], 7);
    assert_eq!(run_cfg["command"]["threshold"], json!({"mode": "min_count", "value": 1}));

    for (task, model) in [("binary", "bin"), ("multi-label", "multi")] {
        ok(&[
            "train", "--dataset", &p("dataset.jsonl"), "--units", &p("units.jsonl"), "--manifest",
            &p("manifest.json"), "--task", task, "--hyperparam", "epochs=200", "--model", &p(model),
        ]);
    }

    let (units, data) = (p("units.jsonl"), p("dataset.jsonl"));
    let sel = ["--units", units.as_str(), "--dataset", data.as_str(), "--split", "TEST"];
    ok(&[&["predict", "--model", &p("bin"), "--out", &p("bin.jsonl")][..], &sel].concat());
    ok(&[
        "eval", "--preds", &p("bin.jsonl"), "--dataset", &p("dataset.jsonl"), "--task", "binary",
        "--out", &p("bin-report.json"), "--summary-csv", &p("bin.csv"), "--name", "RJ",
    ]);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(p("bin-report.json")).unwrap()).unwrap();
    assert!(report["binary"]["accuracy"].as_f64().unwrap() >= 0.95, "{report}");
    assert!(std::fs::read_to_string(p("bin.csv")).unwrap().starts_with("Name,Accuracy,Precision,Recall,F1\nRJ,"));

    ok(&[&["pipeline", "--binary-model", &p("bin"), "--multi-model", &p("multi"), "--out", &p("final.jsonl")][..], &sel].concat());
    ok(&[
        "eval", "--preds", &p("final.jsonl"), "--dataset", &p("dataset.jsonl"), "--task", "multi-label",
        "--manifest", &p("manifest.json"), "--head-tail", "--out", &p("multi-report.json"),
        "--per-type-csv", &p("types.csv"),
    ]);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(p("multi-report.json")).unwrap()).unwrap();
    assert!(report["multi_label"]["weighted"]["f1"].as_f64().unwrap() >= 0.9, "{report}");
    assert!(report["head_tail"]["partition"]["head"].as_array().unwrap().contains(&json!("S8")));
    assert!(std::fs::read_to_string(p("types.csv")).unwrap().contains("\nS8,"));

    let out = ok(&[
        "bench", "--projects-dir", s(&projects), "--binary-model", &p("bin"), "--multi-model", &p("multi"),
        "--runs", s(&runs), "--out", &p("timing.json"), "--boxplot-csv", &p("box.csv"),
    ]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("projects timed: 1") && text.contains("all linters: approach is"), "{text}");
    let timing: Value = serde_json::from_str(&std::fs::read_to_string(p("timing.json")).unwrap()).unwrap();
    assert_eq!(timing["linters"].as_array().unwrap().len(), 2);
}
