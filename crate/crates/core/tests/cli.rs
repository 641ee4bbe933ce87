use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn levt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levt")).args(args).output().expect("run levt")
}

fn ok(args: &[&str]) -> Output {
    let out = levt(args);
    assert!(out.status.success(), "levt {args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const BPE: &str = "#version: 0.2\nP i\nPi l\nPil o\nPilo t\np r\npr o\npro j\nproj e\nproje k\nprojek t</w>\nN e\nNe v\nNev a\nNeva d\nNevad a</w>\n";

#[test]
fn extract_nevada_sentence() {
    let dir = TempDir::new().unwrap();
    let src = write(&dir, "src.txt", "Nevada has completed a pilot project .\nnothing here\n");
    let dict = write(&dir, "dict.tsv", "Nevada\tNevada\npilot project\tPilotprojekt\n");
    let bpe = write(&dir, "codes", BPE);
    let out_path = dir.path().join("c.jsonl");
    let out = ok(&["extract", "--source", s(&src), "--dict", s(&dict), "--bpe", s(&bpe), "-o", s(&out_path)]);

    let text = fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let first: Value = serde_json::from_str(lines[0]).unwrap();
    let targets: Vec<Value> = first["constraints"].as_array().unwrap().iter().map(|c| c["target"].clone()).collect();
    assert_eq!(targets, [serde_json::json!(["Nevada"]), serde_json::json!(["Pilot@@", "projekt"])]);
    assert_eq!(lines[1], r#"{"id":1,"constraints":[]}"#);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("2 sentences, 1 with constraints, 2 constraints, 2.00 per constrained sentence"),
        "{stderr}"
    );
}

#[test]
fn extract_edge_cases() {
    let dir = TempDir::new().unwrap();
    let src = write(&dir, "src.txt", "the pilot project of Nevada\n");
    let empty = write(&dir, "empty.tsv", "");
    let out = ok(&["extract", "--source", s(&src), "--dict", s(&empty)]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "{\"id\":0,\"constraints\":[]}\n");

    let dict = write(&dir, "dict.tsv", "Nevada\tNevada\npilot project\tPilotprojekt\nthe\tdas\n");
    let reference = write(&dir, "ref.txt", "das Pilotprojekt von Nevada\n");
    let out = ok(&["extract", "--source", s(&src), "--dict", s(&dict), "--reference", s(&reference)]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["constraints"].as_array().unwrap().len(), 3);

    let partial_ref = write(&dir, "ref2.txt", "der Versuch in Nevada\n");
    let out = ok(&["extract", "--source", s(&src), "--dict", s(&dict), "--reference", s(&partial_ref)]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["constraints"], serde_json::json!([{"source": ["Nevada"], "target": ["Nevada"]}]));

    let freq = write(&dir, "freq.txt", "the 100\nof 90\n");
    let out = ok(&["extract", "--source", s(&src), "--dict", s(&dict), "--freq-list", s(&freq)]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["constraints"].as_array().unwrap().len(), 2);

    let bad = write(&dir, "bad.tsv", "no tab here\n");
    let out = levt(&["extract", "--source", s(&src), "--dict", s(&bad)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.tsv:1"));

    let out = levt(&["extract", "--source", "/nonexistent/src", "--dict", s(&dict)]);
    assert!(!out.status.success());
}

#[test]
fn oracle_decode_reproduces_references() {
    let dir = TempDir::new().unwrap();
    let refs_text = "In Nevada ist ein Pilot@@ projekt abgeschlossen\ndas ist gut\n\n";
    let src = write(&dir, "src.txt", "Nevada has completed a pilot project .\nthat is good\nempty\n");
    let refs = write(&dir, "refs.txt", refs_text);
    let cons = write(
        &dir,
        "c.jsonl",
        "{\"id\":0,\"constraints\":[{\"source\":[\"Nevada\"],\"target\":[\"Nevada\"]},{\"source\":[\"pilot\",\"project\"],\"target\":[\"Pilot@@\",\"projekt\"]}]}\n{\"id\":1,\"constraints\":[]}\n{\"id\":2,\"constraints\":[]}\n",
    );
    let policy = format!("oracle:{}", s(&refs));
    for mode in ["baseline", "insert", "no-del", "no-ins"] {
        let out = ok(&["decode", "--source", s(&src), "--constraints", s(&cons), "--mode", mode, "--policy", &policy]);
        assert_eq!(String::from_utf8_lossy(&out.stdout), refs_text, "mode {mode}");
    }
}

#[test]
fn baseline_ignores_constraints_and_mismatch_fails() {
    let dir = TempDir::new().unwrap();
    let src = write(&dir, "src.txt", "a b\nc d\n");
    let out = ok(&["decode", "--source", s(&src), "--constraints", "/nonexistent.jsonl", "--mode", "baseline"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "\n\n");

    let one = write(&dir, "one.jsonl", "{\"id\":0,\"constraints\":[]}\n");
    let out = levt(&["decode", "--source", s(&src), "--constraints", s(&one), "--mode", "no-ins"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 constraint records for 2 sentences"));

    let out = levt(&["decode", "--source", s(&src), "--mode", "insert"]);
    assert!(!out.status.success());
}

#[test]
fn no_ins_pipeline_reaches_full_term_usage() {
    let dir = TempDir::new().unwrap();
    let src = write(&dir, "src.txt", "eins zwei drei vier\nfünf sechs\nsieben acht neun zehn elf\n");
    let cons = write(
        &dir,
        "c.jsonl",
        "{\"id\":0,\"constraints\":[{\"source\":[\"x\"],\"target\":[\"Term@@\",\"inus\"]}]}\n{\"id\":1,\"constraints\":[{\"source\":[\"y\"],\"target\":[\"A\"]},{\"source\":[\"z\"],\"target\":[\"B\",\"C\"]}]}\n{\"id\":2,\"constraints\":[]}\n",
    );
    let hyps = dir.path().join("hyps.txt");
    let trace = dir.path().join("trace.jsonl");
    ok(&[
        "decode",
        "--source",
        s(&src),
        "--constraints",
        s(&cons),
        "--mode",
        "no-ins",
        "--policy",
        "random:3",
        "--trace",
        s(&trace),
        "-o",
        s(&hyps),
    ]);
    let out = ok(&["eval", "--hyps", s(&hyps), "--refs", s(&src), "--constraints", s(&cons), "--json"]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["term_usage"], 1.0);
    assert_eq!(report["order_rate"], 1.0);

    let trace_text = fs::read_to_string(&trace).unwrap();
    let first: Value = serde_json::from_str(trace_text.lines().next().unwrap()).unwrap();
    assert_eq!(first["sentence"], 0);
    assert_eq!(first["iteration"], 0);
    assert_eq!(first["tokens"], serde_json::json!(["<s>", "Term@@", "inus", "</s>"]));
    assert_eq!(first["mask"][1], serde_json::json!({"constraint": 0, "offset": 0}));

    let again = dir.path().join("again.txt");
    ok(&[
        "decode",
        "--source",
        s(&src),
        "--constraints",
        s(&cons),
        "--mode",
        "no-ins",
        "--policy",
        "random:3",
        "-o",
        s(&again),
    ]);
    assert_eq!(fs::read(&hyps).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn eval_reports() {
    let dir = TempDir::new().unwrap();
    let refs = write(&dir, "refs.txt", "a b c d e\nf g h i j\nk l m n o\n");
    let a = write(&dir, "a.txt", "a b c d e\nf g h i j\nk l m n\n");
    let b = write(&dir, "b.txt", "a b c d\nf g x i j\nk l m n o\n");

    let out = ok(&["eval", "--hyps", s(&refs), "--refs", s(&refs), "--json"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["bleu"], 100.0);
    assert!(v.get("p_value").is_none());

    let args = ["eval", "--hyps", s(&a), "--refs", s(&refs), "--bootstrap", s(&a), s(&b), "--seed", "42", "--json"];
    let p1: Value = serde_json::from_slice(&ok(&args).stdout).unwrap();
    let p2: Value = serde_json::from_slice(&ok(&args).stdout).unwrap();
    assert!(p1["p_value"].is_number());
    assert_eq!(p1["p_value"], p2["p_value"]);

    let table = String::from_utf8(ok(&["eval", "--hyps", s(&refs), "--refs", s(&refs)]).stdout).unwrap();
    assert!(table.contains("BLEU Full") && table.contains("100.00"), "{table}");

    let short = write(&dir, "short.txt", "a b\n");
    assert!(!levt(&["eval", "--hyps", s(&short), "--refs", s(&refs)]).status.success());
    let out = levt(&["eval", "--hyps", s(&a), "--refs", s(&refs), "--bootstrap", s(&a), s(&b), "--samples", "10"]);
    assert!(!out.status.success());
}

#[test]
fn bench_synthetic() {
    let out = ok(&["bench", "--synthetic", "200", "--repetitions", "3", "--policy", "random:1", "--json"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let modes = v["modes"].as_array().unwrap();
    assert_eq!(modes.len(), 4);
    assert_eq!(modes[0]["mode"], "baseline");
    assert_eq!(modes[0]["overhead"], 0.0);
    assert!(modes.iter().all(|m| m["runs"].as_array().unwrap().len() == 3));

    let out =
        ok(&["bench", "--synthetic", "50", "--mode", "baseline,no-ins", "--policy", "identity", "--workers", "2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("overhead") && text.contains("no-ins"), "{text}");

    assert!(!levt(&["bench", "--synthetic", "10", "--repetitions", "2"]).status.success());
    assert!(!levt(&["bench", "--synthetic", "10", "--policy", "adversarial"]).status.success());
}
