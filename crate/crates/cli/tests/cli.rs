mod common;

use std::fs;

use common::{check_golden, check_round_trip, run, run_in, GOLDEN_CASES};
use serde_json::Value;

fn json(stdout: &str) -> Value {
    serde_json::from_str(stdout).expect("JSON report")
}

#[test]
fn golden_reports() {
    for (name, args) in GOLDEN_CASES {
        let r = run(args);
        assert_eq!(r.code, 0, "{name}: {}", r.stderr);
        check_golden(name, &r.stdout).unwrap();
        check_round_trip(&r.stdout).unwrap();
    }
}

#[test]
fn generate_report_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_in(
        dir.path(),
        &["generate", "--model", "1,0.5", "--dx", "0.5", "--dk", "0.5", "--histogram", "--out-dir", ".", "--json"],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    check_golden("generate_model", &r.stdout).unwrap();
    for f in ["position.json", "momentum.json", "position.csv", "position.meta.json", "momentum.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    // Generated files feed straight back into the other subcommands.
    let s = run_in(dir.path(), &["steering", "--x-hist", "position.csv", "--k-hist", "momentum.csv", "--json"]);
    assert_eq!(s.code, 0, "{}", s.stderr);
    let direct = run(&["steering", "--model", "1,0.5", "--dx", "0.5", "--dk", "0.5", "--json"]);
    let a = json(&s.stdout)["report"]["margin"].as_f64().unwrap();
    let b = json(&direct.stdout)["report"]["margin"].as_f64().unwrap();
    assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    let v = run_in(dir.path(), &["verify-connection", "position.json", "--widths", "0.5"]);
    assert_eq!(v.code, 0, "{}", v.stderr);
}

#[test]
fn uniform_histogram_has_two_bits() {
    let r = run(&["entropy", "uniform4.csv", "--json"]);
    assert_eq!(r.code, 0);
    let q = &json(&r.stdout)["quantities"][0];
    assert_eq!(q["name"], "H(x)");
    assert!((q["value"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    let table = run(&["entropy", "uniform4.csv"]);
    assert!(table.stdout.contains("H(x)"));
}

#[test]
fn counts_are_normalized_and_recorded() {
    let v = json(&run(&["entropy", "counts.csv", "--json"]).stdout);
    assert_eq!(v["normalization"]["total_counts"], 100.0);
    assert_eq!(v["normalization"]["renormalized"], true);
}

#[test]
fn malformed_row_reports_its_line() {
    let r = run(&["entropy", "malformed.csv"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("line 4"), "{}", r.stderr);
}

#[test]
fn unnormalized_input_needs_the_flag() {
    assert_eq!(run(&["entropy", "unnormalized.csv"]).code, 3);
    let r = run(&["entropy", "unnormalized.csv", "--normalize", "--json"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = json(&r.stdout);
    assert_eq!(v["normalization"]["renormalized"], true);
    assert!(v["notes"].as_array().unwrap().iter().any(|n| n.as_str().unwrap().contains("rescaled")));
    assert!((v["quantities"][0]["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn negative_density_is_a_validation_error() {
    let r = run(&["verify-connection", "negative.json", "--widths", "1"]);
    assert_eq!(r.code, 3, "{}", r.stderr);
}

#[test]
fn three_axis_input_gets_three_axis_rows() {
    let dir = tempfile::tempdir().unwrap();
    let g = run_in(dir.path(), &["generate", "--mixture", "3", "--seed", "5", "--out-dir", "."]);
    assert_eq!(g.code, 0, "{}", g.stderr);
    let r = run_in(dir.path(), &["verify-connection", "mixture.json", "--widths", "2", "--json"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = json(&r.stdout);
    let rows = v["gaps"].as_array().unwrap();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r["status"] == "evaluated"), "{rows:?}");
    let p = run_in(dir.path(), &["probe-cmi", "mixture.json", "--widths", "2", "--json"]);
    assert_eq!(p.code, 0, "{}", p.stderr);
    assert_eq!(json(&p.stdout)["probe"]["label"], "exploratory");
}

#[test]
fn coarse_widths_are_flagged_vacuous() {
    let r = run(&["steering", "--model", "1,1", "--dx", "3", "--dk", "3", "--json"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = &json(&r.stdout)["report"];
    assert_eq!(rep["vacuous"], true);
    assert_eq!(rep["violated"], false);
}

#[test]
fn role_swap_is_reported_separately() {
    let r = run(&["steering", "--model", "1,0.5", "--dx", "0.1", "--dk", "0.1", "--swap-roles", "--json"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(json(&r.stdout)["report"]["conditioning"], "a_given_b");
}

#[test]
fn missing_widths_are_rejected_for_steering() {
    let dir = tempfile::tempdir().unwrap();
    let src = common::fixtures();
    for f in ["x_corr.csv", "k_corr.csv"] {
        fs::copy(src.join(f), dir.path().join(f)).unwrap();
    }
    let r = run_in(dir.path(), &["steering", "--x-hist", "x_corr.csv", "--k-hist", "k_corr.csv"]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    let ok = run_in(
        dir.path(),
        &["steering", "--x-hist", "x_corr.csv", "--k-hist", "k_corr.csv", "--dx", "0.5", "--dk", "0.5"],
    );
    assert_eq!(ok.code, 0, "{}", ok.stderr);
}

#[test]
fn exit_code_table() {
    assert_eq!(run(&["--help"]).code, 0);
    assert_eq!(run(&["--version"]).code, 0);
    assert_eq!(run(&["steering", "--help"]).code, 0);
    assert_eq!(run(&[]).code, 5);
    assert_eq!(run(&["frobnicate"]).code, 5);
    assert_eq!(run(&["verify-connection", "--widths", "0.5"]).code, 5);
    assert_eq!(run(&["steering", "--model", "1,x", "--dx", "1", "--dk", "1"]).code, 5);
    assert_eq!(run(&["entropy", "does-not-exist.csv"]).code, 2);
    assert_eq!(run(&["verify-connection", "--model", "1,1", "--widths", "0.3"]).code, 0);
    assert_eq!(run(&["verify-connection", "--model", "0,1", "--widths", "0.5"]).code, 3);
}

#[test]
fn log_variable_enables_diagnostics() {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_entrosteer"))
        .args(["entropy", "uniform4.csv"])
        .current_dir(common::fixtures())
        .env("ENTROSTEER_LOG", "info")
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&out.stderr).contains("entropy"));
}
