use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jointnormal"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn expand_one_third_in_base_two() {
    let out = run(&["expand", "-m", "timesb:2", "--x", "1/3", "-n", "16"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["results"][0]["report"]["expansions"][0]["digits"], "0101010101010101");
    assert_eq!(v["schema_version"], 1);
}

#[test]
fn manifest_file_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("joint.json");
    std::fs::write(
        &path,
        r#"{"command":"joint","maps":["timesb:2","gauss"],"params":{"patterns":[[0],[1]]},"seeds":4,"N":2000}"#,
    )
    .unwrap();
    let out = run(&["--manifest", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let target = v["results"][0]["report"]["rows"][0]["target"].as_f64().unwrap();
    assert!((target - 0.5 * (4.0f64 / 3.0).log2()).abs() < 1e-15);
    assert_eq!(v["aggregate"]["runs"], 4);
}

#[test]
fn gate_failure_exits_two() {
    let out = run(&["normality", "-m", "timesb:2", "--x", "1/3", "-n", "4000"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["aggregate"]["verdict"], "FAIL");
}

#[test]
fn errors_exit_one() {
    let out = run(&["expand", "-m", "timesb:1", "--x", "1/3", "-n", "4"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["levy", "--seeds", "1", "-n", "100000000"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("try n <="));
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn payload_is_reproducible() {
    let args = ["equidist", "-m", "timesb:2", "-m", "timesb:3", "--seeds", "3", "-n", "5000", "--grid", "4"];
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("timing");
        v
    };
    let a = strip(json(&run(&args)));
    let b = strip(json(&run(&args)));
    assert_eq!(a, b);
}

#[test]
fn csv_and_precision_override() {
    let out = run(&["density", "-m", "beta:golden", "--grid", "200", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("bin_lo,bin_hi,density"));
    assert_eq!(lines.count(), 200);

    let out = run(&["expand", "-m", "gauss", "--seed", "5", "-n", "10", "--precision-bits", "300"]);
    assert_eq!(json(&out)["precision_bits"], 300);
}

#[test]
fn every_subcommand_parses() {
    for cmd in [
        "expand", "cylinder", "measure", "density", "normality", "joint", "equidist", "entropy", "levy", "prope",
        "mixing", "equivalence",
    ] {
        let out = run(&[cmd, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{cmd}");
    }
}

#[test]
fn reports_embed_reference_formulas() {
    let out = run(&["entropy", "-m", "gauss", "--seeds", "2", "-n", "500", "--tolerance", "0.2"]);
    let v = json(&out);
    assert_eq!(v["aggregate"]["formula"], "pi^2/(6 log 2)");
    assert_eq!(v["results"][0]["report"]["formula"], "pi^2/(6 log 2)");
    let out = run(&["mixing", "-m", "timesb:2", "--symbols", "0,1", "--interval", "1/4,3/4", "--ns", "1..6"]);
    let v = json(&out);
    assert_eq!(v["results"][0]["report"]["exact"], serde_json::json!(["0", "0", "0", "0", "0", "0"]));
}
