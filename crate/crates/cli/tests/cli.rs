use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cms(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cms"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("bad JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

const BROKEN: &str = "\
system broken
dim 1
metric l1
vertices 1
representative 1 = (0)
edge a : 1 -> 1 map (x/2) prob 0.7
edge b : 1 -> 1 map (x/2 + 1/2) prob 0.2
delta 0.2
";

const REDUCIBLE: &str = "\
system one_way
dim 1
metric l1
vertices 2
vertexset 1 = x >= 0
vertexset 2 = x < 0
representative 1 = (1)
representative 2 = (-1)
edge a : 1 -> 2 map (-x/2 - 1) prob 1
edge b : 2 -> 2 map (x/2 - 1) prob 1
delta 1/2
";

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn rate_respects_the_declared_bound() {
    let out = cms(&["rate", "--builtin", "example_r2", "--budget", "200000", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let max = v["result"]["max_ratio"].as_f64().unwrap();
    assert!((0.985..=209.0 / 210.0 + 1e-9).contains(&max), "max ratio {max}");
    assert_eq!(v["master_seed"], 7);
}

#[test]
fn entropy_matches_the_stationary_chain() {
    let out = cms(&["entropy", "--builtin", "gmarkov:0.7,0.3,0.4,0.6", "--n", "100000", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &json(&out)["result"];
    let exact = r["closed_form"].as_f64().unwrap();
    assert!((exact - 0.63750).abs() < 1e-5);
    for key in ["lyapunov", "integral"] {
        let est = r[key]["value"].as_f64().unwrap();
        assert!((est - exact).abs() < 0.01, "{key}: {est}");
    }
}

#[test]
fn validate_reports_violations_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "broken.cms", BROKEN);
    let out = cms(&["validate", "--system", &path]);
    assert_eq!(out.status.code(), Some(1));
    let r = &json(&out)["result"];
    assert_eq!(r["pass"], false);
    assert!(r["max_sum_error"].as_f64().unwrap() > 0.09);
}

#[test]
fn validate_passes_on_builtins() {
    for b in ["example_r2", "example_r1", "gmarkov:0.7,0.3,0.4,0.6"] {
        let out = cms(&["validate", "--builtin", b, "--budget", "2000"]);
        assert_eq!(out.status.code(), Some(0), "{b}");
    }
}

#[test]
fn graph_check_flags_reducible_graphs() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "one_way.cms", REDUCIBLE);
    let out = cms(&["graph-check", "--system", &path]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["result"]["irreducible"], false);

    let ok = cms(&["graph-check", "--builtin", "example_r2"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(json(&ok)["result"]["period"], 1);
}

#[test]
fn usage_and_parse_errors_exit_two() {
    assert_eq!(cms(&["rate"]).status.code(), Some(2));
    assert_eq!(cms(&["rate", "--builtin", "nope"]).status.code(), Some(2));
    assert_eq!(cms(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(cms(&["simulate", "--builtin", "example_r2", "--x", "0,0"]).status.code(), Some(2));
    assert_eq!(
        cms(&["rate", "--builtin", "example_r1", "--system", "x.cms"]).status.code(),
        Some(2)
    );

    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "bad.cms", "system bad\ndim 1\nmetric sup-ish\n");
    let out = cms(&["validate", "--system", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn payloads_are_reproducible_and_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, jobs: &str| {
        let out = dir.path().join(name);
        let o = out.display().to_string();
        let args = [
            "martingale", "--builtin", "example_r2", "--x", "0,1", "--y", "1,2", "--budget", "5000", "--seed", "3",
            "--jobs", jobs, "--out", &o,
        ];
        assert_eq!(cms(&args).status.code(), Some(0));
        std::fs::read(out).unwrap()
    };
    let a = run("a.json", "1");
    let a2 = run("a.json", "1");
    let b = run("a.json", "4");
    assert_eq!(a, a2);
    assert_eq!(a, b);
}

#[test]
fn sidecar_manifest_records_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let sys = write(dir.path(), "broken.cms", BROKEN);
    let out = dir.path().join("run.csv");
    let o = out.display().to_string();
    let status = cms(&["simulate", "--system", &sys, "--n", "5", "--seed", "11", "--format", "csv", "--out", &o]);
    assert_eq!(status.status.code(), Some(0));

    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("master_seed,stream_id,step,edge"));
    assert_eq!(lines.count(), 6);

    let m: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["master_seed"], 11);
    assert_eq!(m["system"]["kind"], "file");
    assert_eq!(m["system"]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(m["command_line"][1], "simulate");
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn stdout_mode_sends_the_manifest_to_stderr() {
    let out = cms(&["cylinder", "--builtin", "example_r1", "--x", "0", "--word", "e0,e1"]);
    assert_eq!(out.status.code(), Some(0));
    let p = json(&out)["result"]["words"][0]["prob"].as_f64().unwrap();
    assert!((p - 17.0 / 24.0 * 7.0 / 24.0).abs() < 1e-15);
    let m: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(m["system"]["name"], "example_r1");
}

#[test]
fn cylinder_frequencies_agree_with_exact_probabilities() {
    let out = cms(&["cylinder", "--builtin", "example_r2", "--x", "0,1", "--depth", "2", "--budget", "20000", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("master_seed,word,prob,frequency,std_error,z"));
    assert_eq!(text.lines().count(), 1 + 2 + 4);
}

#[test]
fn moduli_classifies_the_closed_form_profile() {
    let out = cms(&["moduli", "--jo", "0.5,0.25", "--n", "100000"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &json(&out)["result"];
    assert_eq!(r["variation"]["class"], "square_summable_not_dini");
    let last = r["checkpoints"].as_array().unwrap().last().unwrap();
    assert_eq!(last["n"], 100000);
    assert_eq!(last["ln_t"], -100000.0);
}

#[test]
fn measure_checks_the_moment_bound() {
    let out = cms(&["measure", "--builtin", "example_r2", "--n", "20000", "--f", "min(norm1(x, y), 10)", "--word", "e2"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &json(&out)["result"];
    assert_eq!(r["moment"]["pass"], true);
    assert_eq!(r["support_size"], 20000);
    assert!(r["cylinders"][0]["measure"]["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn ergodic_and_code_run_on_sequence_systems() {
    let out = cms(&["ergodic", "--builtin", "gmarkov:0.7,0.3,0.4,0.6", "--f", "2 - x2", "--n", "50000", "--seed", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out)["result"]["estimate"]["value"].as_f64().unwrap();
    assert!((v - 4.0 / 7.0).abs() < 0.02, "{v}");

    let out = cms(&["code", "--builtin", "gmarkov:0.7,0.3,0.4,0.6", "--depths", "5,10", "--words", "50"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = json(&out)["result"]["rows"].clone();
    assert_eq!(rows[0]["max_successive"], 1.0 / 32.0);
}
