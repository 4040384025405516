use std::path::Path;
use std::process::{Command, Output};

fn nofl(out_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nofl"))
        .args(args)
        .env("NOFL_OUT_DIR", out_dir)
        .output()
        .expect("run nofl")
}

fn record(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    serde_json::from_str(text.lines().last().expect("one record")).unwrap()
}

#[test]
fn xor_norm_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let r = record(&nofl(dir.path(), &["norm", "--fn", "XOR", "--n", "8", "--k", "2"]));
    assert_eq!(r["metrics"]["value"], 1.0);
    assert_eq!(r["metrics"]["norm"]["method"], "exact");
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn ip_weak_learner_beats_its_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = nofl(dir.path(), &["--assert", "weaklearn", "--fn", "IP", "--n", "8", "--k", "2", "--runs", "100000"]);
    let r = record(&out);
    let m = &r["metrics"];
    let agreement = m["agreement"].as_f64().unwrap();
    let hw = m["halfwidth"].as_f64().unwrap();
    assert!((m["bound"].as_f64().unwrap() - 0.5078125).abs() < 1e-12);
    assert!(agreement >= 0.5078 - 4.0 * hw);
    assert!(m["max_distinct_per_run"].as_u64().unwrap() <= 64);
    assert_eq!(r["derived"]["theory_alpha"], 2f64.powi(-6));
}

#[test]
fn unknown_subcommand_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = nofl(dir.path(), &["frobnicate"]);
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn failed_assertion_sets_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = nofl(dir.path(), &["--assert", "norm", "--fn", "XOR", "--n", "6", "--k", "3", "--expect", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    let ok = nofl(dir.path(), &["--assert", "norm", "--fn", "IP", "--n", "6", "--expect", "0.125"]);
    assert!(ok.status.success());
}

#[test]
fn plant_then_compress_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let r = record(&nofl(dir.path(), &["plant", "--class", "sym-circuit", "--n", "8", "--gates", "2", "--seed", "4"]));
    let table = r["metrics"]["table"].as_str().unwrap().to_owned();
    assert!(dir.path().join("instance.json").exists());
    let out = nofl(dir.path(), &["--assert", "compress", "--table", &table, "--alpha", "0.25", "--rounds-cap", "4"]);
    let c = record(&out);
    assert_eq!(c["metrics"]["exact"], true);
    let written = std::fs::read_to_string(dir.path().join("compressed.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&written).unwrap();
    assert_eq!(v["n"], 8);
}

#[test]
fn boost_is_reproducible_and_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["boost", "--fn", "XOR", "--n", "8", "--noise", "0.1", "--alpha", "0.25", "--epsilon", "0.25", "--seed", "9"];
    let a = record(&nofl(dir.path(), &args));
    let b = record(&nofl(dir.path(), &args));
    assert_eq!(a["metrics"], b["metrics"]);
    assert_eq!(a["config_hash"], b["config_hash"]);
    let trace = std::fs::read_to_string(dir.path().join("boost_trace.csv")).unwrap();
    assert!(trace.starts_with("round,attempts,weak_corr,accepted,holdout_corr,mq_total"));
    assert_eq!(trace.lines().count(), 1 + a["metrics"]["rounds"].as_u64().unwrap() as usize);
}

#[test]
fn records_append_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("runs/records.jsonl");
    let p = path.to_str().unwrap();
    for _ in 0..2 {
        let out = nofl(dir.path(), &["--records", p, "savings", "--class", "ptf-circuit", "--n", "64", "--m", "1", "--gamma", "0.5"]);
        assert!(out.status.success());
        assert!(out.stdout.is_empty());
    }
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["metrics"]["savings"]["savings"], -41.0);
    assert_eq!(lines[0]["metrics"]["savings"]["trivial"], true);
}

#[test]
fn exact_and_pac_pipelines() {
    let dir = tempfile::tempdir().unwrap();
    let e = record(&nofl(dir.path(), &["--assert", "exactlearn", "--fn", "XOR", "--n", "8", "--policy", "random", "--cx-seed", "3"]));
    assert_eq!(e["metrics"]["exact"], true);
    let p = record(&nofl(dir.path(), &["--assert", "pacdi", "--fn", "XOR", "--n", "8"]));
    assert!(p["metrics"]["error"].as_f64().unwrap() <= 0.1);
    let csv = std::fs::read_to_string(dir.path().join("pacdi_trace.csv")).unwrap();
    assert!(csv.starts_with("round,samples,counterexample"));
}

#[test]
fn odd_arity_is_padded() {
    let dir = tempfile::tempdir().unwrap();
    let r = record(&nofl(dir.path(), &["norm", "--fn", "XOR", "--n", "7", "--k", "2"]));
    assert_eq!(r["metrics"]["padded_n"], 8);
}
