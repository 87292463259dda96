use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn sgg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgg")).args(args).output().unwrap()
}

fn sgg_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_sgg"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn first_error_line(o: &Output) -> String {
    String::from_utf8(o.stderr.clone())
        .unwrap()
        .lines()
        .next()
        .unwrap_or("")
        .to_string()
}

fn assert_error(o: &Output, status: i32, kind: &str) {
    assert_eq!(o.status.code(), Some(status), "{}", first_error_line(o));
    let line = first_error_line(o);
    assert!(line.starts_with(&format!("error[{kind}]: ")), "{line}");
}

fn example() -> String {
    fixture("example_graph.json").display().to_string()
}

#[test]
fn query_counts_objects() {
    let o = sgg(&["query", &example(), "-e", "MATCH (o:Object) RETURN count(*)"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "count(*)\n8\n");
}

#[test]
fn repl_matches_one_shot_output() {
    let queries = [
        "MATCH (o:Object) WHERE o.class = 'tree' RETURN o.nodeSymbol ORDER BY o.nodeSymbol",
        "MATCH (r:Room)-[:CONTAINS*]->(o:Object) RETURN r.nodeSymbol, count(o)",
        "MATCH (o:Objects) RETURN o",
    ];
    let repl = sgg_stdin(&["query", &example()], &(queries.join("\n") + "\n"));
    assert!(repl.status.success());
    let mut expected = String::new();
    for q in queries {
        let o = sgg(&["query", &example(), "-e", q]);
        if o.status.success() {
            expected += &stdout(&o);
        } else {
            let line = first_error_line(&o);
            expected += line.strip_prefix("error[query]: ").unwrap();
            expected += "\n";
        }
    }
    assert_eq!(stdout(&repl), expected);
}

#[test]
fn repl_keeps_set_updates() {
    let input = "MATCH (o:Object) WHERE o.nodeSymbol = 'O5' SET o.class = 'rock'\n\
                 MATCH (o:Object) WHERE o.nodeSymbol = 'O5' RETURN o.class\n";
    let o = sgg_stdin(&["query", &example()], input);
    assert!(stdout(&o).ends_with("o.class\nrock\n"), "{}", stdout(&o));
}

#[test]
fn query_errors_exit_one() {
    let o = sgg(&["query", &example(), "-e", "MATCH (o:Objects) RETURN o"]);
    assert_error(&o, 1, "query");
    let o = sgg(&["query", "/nonexistent/graph.json", "-e", "MATCH (n) RETURN n"]);
    assert_error(&o, 1, "graph");
}

#[test]
fn check_reports_equivalence() {
    let o = sgg(&[
        "check",
        "--task",
        "pddl",
        "--gold",
        "(and (safe O54) (at-object O21))",
        "--pred",
        "(and (at-object O21) (safe O54))",
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "equivalent\n");
    let o = sgg(&["check", "--task", "qa", "--gold", "60.00", "--pred", "60.02"]);
    assert_eq!(stdout(&o), "not equivalent\n");
    assert_error(&o, 1, "mismatch");
    let o = sgg(&[
        "check",
        "--task",
        "qa",
        "--gold",
        "60.00",
        "--pred",
        "60.02",
        "--epsilon",
        "0.05",
    ]);
    assert!(o.status.success());
    let o = sgg(&["check", "--task", "pddl", "--gold", "(and (safe", "--pred", "(safe O1)"]);
    assert_error(&o, 1, "parse");
}

#[test]
fn usage_errors_exit_two() {
    let o = sgg(&["query", &example(), "--bogus"]);
    assert_error(&o, 2, "usage");
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage:"));
    let o = sgg(&[
        "ask",
        &example(),
        "--task",
        "pddl",
        "--input",
        "Go to object 1.",
        "--backend",
        "scripted:x.json",
        "--backend",
        "http",
    ]);
    assert_error(&o, 2, "usage");
    let o = sgg(&["ask", &example(), "--task", "qa", "--input", "x", "--backend", "http"]);
    assert_error(&o, 2, "usage");
    let o = sgg(&["frobnicate"]);
    assert_error(&o, 2, "usage");
}

#[test]
fn ask_writes_a_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("script.json");
    std::fs::write(
        &script,
        r#"[{"tool_call": "MATCH (o:Object) WHERE o.class = 'boat' RETURN o.nodeSymbol"},
            "It is O5. <answer>(visited-object O5)</answer>"]"#,
    )
    .unwrap();
    let transcript = dir.path().join("t.json");
    let o = sgg(&[
        "ask",
        &example(),
        "--task",
        "pddl",
        "--input",
        "Go to the boat.",
        "--backend",
        &format!("scripted:{}", script.display()),
        "--transcript",
        transcript.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", first_error_line(&o));
    assert_eq!(stdout(&o), "(visited-object O5)\n");
    let t: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&transcript).unwrap()).unwrap();
    assert_eq!(t["tool_calls"], 1);
    assert_eq!(t["outcome"]["status"], "answer");
    let sum: u64 = t["messages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["tokens"].as_u64().unwrap())
        .sum();
    let triple = ["input_tokens", "tool_tokens", "output_tokens"].map(|k| t[k].as_u64().unwrap());
    assert_eq!(triple.iter().sum::<u64>(), sum);
}

#[test]
fn ask_reports_missing_tags() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("script.json");
    std::fs::write(&script, r#"["no tags here"]"#).unwrap();
    let o = sgg(&[
        "ask",
        &example(),
        "--task",
        "qa",
        "--kind",
        "string",
        "--input",
        "Which object is the boat?",
        "--backend",
        &format!("scripted:{}", script.display()),
    ]);
    assert_error(&o, 1, "extraction");
}

fn gold_scripts(dir: &Path) -> PathBuf {
    let dataset = std::fs::read_to_string(fixture("example_dataset.jsonl")).unwrap();
    let mut scripts = serde_json::Map::new();
    for line in dataset.lines() {
        let case: serde_json::Value = serde_json::from_str(line).unwrap();
        let answer = format!("<answer>{}</answer>", case["gold"].as_str().unwrap());
        scripts.insert(case["id"].as_str().unwrap().to_string(), serde_json::json!([answer]));
    }
    let path = dir.join("scripts.json");
    std::fs::write(&path, serde_json::Value::Object(scripts).to_string()).unwrap();
    path
}

#[test]
fn eval_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let scripts = gold_scripts(dir.path());
    let report = dir.path().join("report.json");
    let large = format!("large={}", fixture("large_graph.json").display());
    let small = format!("small={}", fixture("small_graph.json").display());
    let o = sgg(&[
        "eval",
        &large,
        &small,
        "--dataset",
        fixture("example_dataset.jsonl").to_str().unwrap(),
        "--mode",
        "context",
        "--backend",
        &format!("scripted:{}", scripts.display()),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", first_error_line(&o));
    let table = stdout(&o);
    let header: Vec<&str> = table.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(header, ["task", "graph", "mode", "cases", "success", "I", "T", "O"]);
    assert!(table.ends_with("overall: 20/20 = 1.000\n"), "{table}");
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["success_rate"], 1.0);
    assert_eq!(r["outcomes"].as_array().unwrap().len(), 20);
}

#[test]
fn eval_rejects_unknown_graph_ids() {
    let dir = tempfile::tempdir().unwrap();
    let scripts = gold_scripts(dir.path());
    let o = sgg(&[
        "eval",
        &format!("large={}", fixture("large_graph.json").display()),
        "--dataset",
        fixture("example_dataset.jsonl").to_str().unwrap(),
        "--backend",
        &format!("scripted:{}", scripts.display()),
        "--report",
        dir.path().join("r.json").to_str().unwrap(),
    ]);
    assert_error(&o, 1, "config");
    assert!(first_error_line(&o).contains("small"));
}

#[test]
fn ingest_and_serialize() {
    let o = sgg(&["ingest", &example(), "--validate"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("objects: 8\n"));
    let o = sgg(&["serialize", &example()]);
    assert!(o.status.success());
    let listing = std::fs::read_to_string(fixture("appendix_listing.txt")).unwrap();
    assert_eq!(stdout(&o), listing.replacen("6.63, 0.2", "6.63,0.2", 1));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"nodes":{"objects":[{"id":"O1","class":"unicorn","center":[0,0,0]}]}}"#,
    )
    .unwrap();
    let o = sgg(&["ingest", bad.to_str().unwrap(), "--validate"]);
    assert_error(&o, 1, "validation");
    assert!(stdout(&o).contains("fail: 2 violation(s)"));
}
