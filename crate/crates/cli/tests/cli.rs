use std::fs;
use std::process::{Command, Output};

use gencp::bench::find_task;
use gencp::validate_solution;
use serde_json::Value;
use tempfile::tempdir;

fn gencp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gencp"))
        .args(args)
        .env_remove("GENCP_LLM_API_KEY")
        .env_remove("GENCP_MLM_API_KEY")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn run_streams_three_valid_solutions() {
    let dir = tempdir().unwrap();
    let sols = dir.path().join("s.jsonl");
    let metrics = dir.path().join("m.json");
    let o = gencp(&[
        "run", "--builtin", "sent1-scaled", "--backend", "mock", "--seed", "7",
        "--max-solutions", "3",
        "--solutions", sols.to_str().unwrap(),
        "--metrics", metrics.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let task = find_task("sent1-scaled").unwrap();
    let lines: Vec<String> = fs::read_to_string(&sols).unwrap().lines().map(String::from).collect();
    assert_eq!(lines.len(), 3);
    for l in &lines {
        let v: Value = serde_json::from_str(l).unwrap();
        for key in ["task", "text", "log_likelihood", "llm_calls", "mlm_calls", "backtracks", "elapsed_ms"] {
            assert!(v.get(key).is_some(), "missing {key} in {l}");
        }
        assert!(validate_solution(v["text"].as_str().unwrap(), &task, true).satisfied);
    }
    let m: Value = serde_json::from_str(&fs::read_to_string(&metrics).unwrap()).unwrap();
    assert_eq!(m["metrics"]["solutions"], 3);
    assert_eq!(m["stop"], "solution_limit");
}

#[test]
fn header_prints_defaults() {
    let o = gencp(&["run", "--builtin", "sent1-scaled", "--max-solutions", "1"]);
    let err = stderr(&o);
    for part in ["top_k=50", "temperature=0.8", "depth=2", "variant=previewMLM", "count_spaces=true"] {
        assert!(err.contains(part), "{part} not in {err}");
    }
}

#[test]
fn infeasible_task_exits_one() {
    let dir = tempdir().unwrap();
    let task = dir.path().join("t.json");
    fs::write(
        &task,
        r#"{"name": "tiny", "sentences": 1, "constraints": [{"type": "char_sum", "target": 1}]}"#,
    )
    .unwrap();
    let o = gencp(&["run", "--task", task.to_str().unwrap(), "--variant", "metavar", "--max-llm-calls", "500"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
}

#[test]
fn validate_reports_violations_and_exits_zero() {
    let dir = tempdir().unwrap();
    let text = dir.path().join("x.txt");
    fs::write(&text, "The dragon slept.\n").unwrap();
    let o = gencp(&["validate", "--builtin", "sent-1", "--text", text.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("measured 17"), "{out}");
    assert!(out.contains("1 violation(s)"), "{out}");

    let o = gencp(&["validate", "--builtin", "sent-1", "--text", text.to_str().unwrap(), "--json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["satisfied"], false);
}

#[test]
fn http_without_key_exits_two_before_network() {
    // nothing listens on port 9; a connection attempt would be a different error
    let o = gencp(&[
        "run", "--builtin", "sent-1", "--backend", "http",
        "--llm-url", "http://127.0.0.1:9", "--variant", "metavar",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("GENCP_LLM_API_KEY"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(gencp(&["run", "--builtin", "no-such-task"]).status.code(), Some(2));
    assert_eq!(gencp(&["run"]).status.code(), Some(2));
    assert_eq!(
        gencp(&["run", "--builtin", "sent-1", "--task", "x.json"]).status.code(),
        Some(2)
    );
    let dir = tempdir().unwrap();
    let task = dir.path().join("bad.json");
    fs::write(&task, r#"{"name": "x", "sentences": 1, "constraints": [{"type": "rhyme"}]}"#).unwrap();
    let o = gencp(&["run", "--task", task.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("constraints[0]"), "{}", stderr(&o));
}

#[test]
fn suite_reports_are_reproducible() {
    let dir = tempdir().unwrap();
    let run = |jobs: &str, name: &str| {
        let csv = dir.path().join(format!("{name}.csv"));
        let sols = dir.path().join(format!("{name}.jsonl"));
        let o = gencp(&[
            "suite", "--builtin", "sent1-scaled", "--builtin", "para5-scaled",
            "--top-k", "8", "--max-word-len", "12", "--max-solutions", "3",
            "--frozen-clock", "--jobs", jobs,
            "--metrics", csv.to_str().unwrap(),
            "--solutions", sols.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        (fs::read_to_string(csv).unwrap(), fs::read_to_string(sols).unwrap())
    };
    let a = run("1", "a");
    let b = run("4", "b");
    assert_eq!(a, b);
    let mut lines = a.0.lines();
    assert_eq!(
        lines.next().unwrap(),
        "task,variant,depth,llm_calls,mlm_calls,backtracks,solutions,wall_ms,status"
    );
    assert_eq!(lines.count(), 6);
    assert_eq!(a.1.lines().count(), 18);
}
