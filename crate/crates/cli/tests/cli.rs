use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use markov_conc::mixing::MixingReport;
use markov_conc::simulate::{TailExperimentReport, TvExperimentReport};
use markov_conc::spectral::SpectralReport;
use serde_json::Value;
use tempfile::TempDir;

const Q0: &str =
    r#"{"states":["00","01","10","11"],"matrix":[[0.5,0.5,0,0],[0,0,0.5,0.5],[0.5,0.5,0,0],[0,0,0.5,0.5]]}"#;
const P0: &str = r#"{"states":["0","1"],"matrix":[[0.5,0.5],[0.5,0.5]]}"#;
const P1: &str = r#"{"states":["0","1"],"matrix":[[0.6,0.4],[0.4,0.6]]}"#;

fn mcconc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcconc")).args(args).output().expect("binary runs")
}

fn json_ok(args: &[&str]) -> Value {
    let out = mcconc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn spectral_on_pair_chain() {
    let dir = TempDir::new().unwrap();
    let q0 = write(&dir, "q0.json", Q0);
    let v = json_ok(&["spectral", s(&q0)]);
    assert_eq!(v["gamma_ps"], 0.5);
    assert_eq!(v["k_ps"], 2);
    let report: SpectralReport = serde_json::from_value(v.clone()).unwrap();
    assert!(!report.reversible);
    assert_eq!(json_ok(&["spectral", "--kernel", s(&q0)]), v);
}

#[test]
fn bernstein_example() {
    let v = json_ok(&[
        "bounds",
        "bernstein",
        "--variant",
        "rev",
        "--n",
        "100",
        "--vf",
        "0.25",
        "--gamma",
        "0.8",
        "--c",
        "0.5",
        "--t",
        "20",
    ]);
    let p = v["probability"].as_f64().unwrap();
    assert!((p - 0.4038).abs() < 5e-5, "{p}");
    assert_eq!(v["inputs"]["variant"], "rev");
    assert_eq!(v["clamped"], false);
}

#[test]
fn coin_demo_reproduces_the_test() {
    let start = Instant::now();
    let v = json_ok(&["coin-demo"]);
    assert!(start.elapsed() < Duration::from_secs(60));
    let stat = v["statistic"]["value"].as_f64().unwrap();
    assert!((stat / -7.080e-3 - 1.0).abs() < 0.005, "{stat}");
    assert_eq!(v["decision"], "Reject");
    assert_eq!(v["gamma_ps_q0"], 0.5);
    assert_eq!(v["gamma_ps_q1"], 0.48);
    assert_eq!(v["pi_q1"]["weights"], serde_json::json!([0.3, 0.2, 0.2, 0.3]));
    for key in ["type1", "type2"] {
        let e = v[key]["exponent"].as_f64().unwrap();
        assert!(e > 3.9 && e < 4.4, "{key} exponent {e}");
    }
}

#[test]
fn coin_demo_data_override() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "tosses.txt", &"0101010101\n".repeat(40));
    let v = json_ok(&["coin-demo", "--data", s(&data)]);
    assert_eq!(v["n"], 400);
    // alternating tosses favour the fair coin
    assert_eq!(v["decision"], "StandBy");
}

#[test]
fn hypothesis_with_and_without_data() {
    let dir = TempDir::new().unwrap();
    let p0 = write(&dir, "p0.json", P0);
    let p1 = write(&dir, "p1.json", P1);
    let v = json_ok(&["hypothesis", s(&p0), s(&p1), "--n", "10000"]);
    assert!(v["decision"].is_null());
    assert_eq!(v["n"], 10000);
    // runs of four: three of every four steps repeat the state
    let data = write(&dir, "obs.txt", &"0 0 0 0 1 1 1 1\n".repeat(50));
    let v = json_ok(&["hypothesis", s(&p0), s(&p1), "--data", s(&data)]);
    assert_eq!(v["n"], 400);
    assert_eq!(v["decision"], "Reject");
    let out = mcconc(&["hypothesis", s(&p0), s(&p1)]);
    assert_eq!(out.status.code(), Some(1));
    // too few observations for a non-empty threshold range
    let short = write(&dir, "short.txt", "0 1 1 0");
    let out = mcconc(&["hypothesis", s(&p0), s(&p1), "--data", s(&short)]);
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "ThresholdOutOfRange");
}

#[test]
fn mixing_report_and_table() {
    let dir = TempDir::new().unwrap();
    let p1 = write(&dir, "p1.json", P1);
    let v = json_ok(&["mixing", s(&p1), "--eps", "0.25,0.01", "--tmax", "20"]);
    let report: MixingReport = serde_json::from_value(v.clone()).unwrap();
    assert_eq!(report.t_max_scanned, 20);
    assert_eq!(report.t_mix(0.25), Some(1));
    assert!(v["gap_lower_bounds"]["gamma_star_lb"].is_number());
    assert_eq!(v["t_mix_upper_bounds"].as_array().unwrap().len(), 4);

    let out = mcconc(&["mixing", s(&p1), "--tmax", "3", "--table"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("t\td(t)\tdbar(t)"));
}

#[test]
fn variance_and_mcdiarmid() {
    let dir = TempDir::new().unwrap();
    let p1 = write(&dir, "p1.json", P1);
    let v = json_ok(&["bounds", "variance", s(&p1), "--f", "1,-1", "--n", "10"]);
    assert!(v["exact"].as_f64().unwrap() <= v["bound_rev"].as_f64().unwrap());
    let v = json_ok(&["bounds", "mcdiarmid", "--c", "1", "--n", "4", "--tau-min", "2", "--t", "5"]);
    assert_eq!(v["inputs"]["c"].as_array().unwrap().len(), 4);
    let e = v["exponent"].as_f64().unwrap();
    assert!((e - 25.0 / 16.0).abs() < 1e-5);
    let out = mcconc(&["bounds", "mcdiarmid", "--c", "1,2", "--n", "3", "--tau-min", "2", "--t", "5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn marton_mdep_norm() {
    let v = json_ok(&["marton", "--n", "3", "--mdep", "--matrix"]);
    let norm = v["operator_norm"].as_f64().unwrap();
    assert!((norm - 2.0 * (std::f64::consts::PI / 7.0).cos()).abs() < 1e-5);
    assert_eq!(v["matrix"], serde_json::json!([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]]));
    let out = mcconc(&["marton", "--n", "3", "--eps", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_writes_csv_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let p1 = write(&dir, "p1.json", P1);
    let csv = dir.path().join("tail.csv");
    let args = [
        "simulate",
        s(&p1),
        "--f",
        "1,0",
        "--n",
        "50",
        "--trials",
        "400",
        "--seed",
        "3",
        "--t-grid",
        "2,4,8",
        "--csv",
        s(&csv),
    ];
    let v = json_ok(&args);
    let report: TailExperimentReport = serde_json::from_value(v).unwrap();
    assert_eq!(report.t_grid, vec![2.0, 4.0, 8.0]);
    assert!(report.violations.is_empty());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("t,empirical,std_error,rev_sigma"));

    let mut seq = args.to_vec();
    seq.push("--sequential");
    let a = json_ok(&args);
    assert_eq!(a, json_ok(&seq));

    let v = json_ok(&["simulate", s(&p1), "--tv", "--n", "50", "--trials", "200"]);
    let tv: TvExperimentReport = serde_json::from_value(v).unwrap();
    assert!(tv.mean_within_bound);
}

#[test]
fn out_and_precise_flags() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("report.json");
    let res = mcconc(&["--precise", "coin-demo", "--out", s(&out)]);
    assert!(res.status.success());
    assert!(res.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let stat = v["statistic"]["value"].as_f64().unwrap();
    assert_ne!(stat, six_digits(stat));
}

fn six_digits(x: f64) -> f64 {
    format!("{x:.5e}").parse().unwrap()
}

#[test]
fn validation_errors_exit_one_with_json() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", r#"{"states":["a","b"],"matrix":[[0.5,0.4],[0.5,0.5]]}"#);
    let out = mcconc(&["spectral", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "NonStochastic");
    assert!(out.stdout.is_empty());

    for args in [
        vec!["spectral", "/nonexistent/kernel.json"],
        vec!["bounds", "bernstein", "--variant", "rev", "--t", "1"],
        vec!["bounds", "bernstein", "--variant", "bogus", "--t", "1"],
        vec!["--no-such-flag"],
    ] {
        let out = mcconc(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err: Value = serde_json::from_slice(&out.stderr).unwrap();
        assert!(err["error"]["kind"].is_string());
    }
}
