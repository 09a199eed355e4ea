use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robustmix")).args(args).output().unwrap()
}

fn json(args: &[&str]) -> serde_json::Value {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn record<'a>(v: &'a serde_json::Value, quantity: &str) -> &'a serde_json::Value {
    &v["records"].as_array().unwrap().iter().find(|r| r["quantity"] == quantity).unwrap()["value"]
}

#[test]
fn tree_lemma_depth_one() {
    let v = json(&["tree-lemma", "--q", "1", "--depth", "1"]);
    assert!((record(&v, "left_probability").as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    let v = json(&["tree-lemma", "--q", "2", "--depth", "6", "--uniform"]);
    assert!((record(&v, "left_probability").as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn conductance_and_harmonic_on_a_path() {
    let v = json(&["conductance", "--generator", "path:5", "--source", "0", "--sinks", "4"]);
    assert!((record(&v, "effective_resistance").as_f64().unwrap() - 4.0).abs() < 1e-12);
    let v = json(&["harmonic", "--generator", "path:5", "--start", "1", "--boundary", "0,4"]);
    assert!((record(&v, "0").as_f64().unwrap() - 0.75).abs() < 1e-12);
}

#[test]
fn generate_then_measure_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&["generate", "--n", "2", "--out", d]);
    assert!(out.status.success());
    let graph = dir.path().join("family.graph");
    let labels = dir.path().join("family.labels");
    let v = json(&[
        "measure",
        "--graph",
        graph.to_str().unwrap(),
        "--labels",
        labels.to_str().unwrap(),
        "--starts",
        "o2",
        "--p",
        "2",
    ]);
    let from_file = record(&v, "tau").as_u64().unwrap();
    let v = json(&["measure", "--generator", "family:2", "--starts", "o2", "--p", "2"]);
    assert_eq!(record(&v, "tau").as_u64().unwrap(), from_file);
}

#[test]
fn csv_output_has_header() {
    let out = run(&["spectral", "--generator", "cycle:6", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("quantity,value,method,graph_hash\n"));
    assert!(text.contains("\ngap,"));
}

#[test]
fn bound_suite_exit_codes() {
    assert!(run(&["experiment", "bounds", "--corpus", "5"]).status.success());
    let out = run(&["experiment", "bounds", "--corpus", "0", "--inject-faulty-kernel"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn reruns_are_byte_identical() {
    let a = run(&["experiment", "robustness", "--seed", "5"]);
    let b = run(&["experiment", "robustness", "--seed", "5"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn audit_passes_for_small_n() {
    let v = json(&["audit", "--n", "2"]);
    assert!(v["violations"].as_array().unwrap().is_empty());
}

#[test]
fn bad_input_is_an_error() {
    let out = run(&["measure", "--generator", "nonsense:3"]);
    assert_eq!(out.status.code(), Some(2));
}
