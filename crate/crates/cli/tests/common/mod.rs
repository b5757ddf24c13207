#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

pub const GOLDEN_TOLERANCE: f64 = 1e-9;

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Runs the binary from the fixtures directory so file paths in reports are
/// stable.
pub fn run(args: &[&str]) -> Run {
    run_in(&fixtures(), args)
}

pub fn run_in(dir: &Path, args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_entrosteer"))
        .args(args)
        .current_dir(dir)
        .env_remove("ENTROSTEER_LOG")
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// First difference between two JSON documents, numbers compared with a
/// mixed absolute/relative tolerance.
pub fn json_diff(path: &str, got: &Value, want: &Value, tol: f64) -> Option<String> {
    match (got, want) {
        (Value::Number(a), Value::Number(b)) => {
            let (a, b) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            ((a - b).abs() > tol * (1.0 + b.abs())).then(|| format!("{path}: {a} != {b}"))
        }
        (Value::Array(a), Value::Array(b)) => {
            if a.len() != b.len() {
                return Some(format!("{path}: length {} != {}", a.len(), b.len()));
            }
            a.iter()
                .zip(b)
                .enumerate()
                .find_map(|(i, (x, y))| json_diff(&format!("{path}[{i}]"), x, y, tol))
        }
        (Value::Object(a), Value::Object(b)) => {
            let ka: Vec<&String> = a.keys().collect();
            let kb: Vec<&String> = b.keys().collect();
            if ka != kb {
                return Some(format!("{path}: keys {ka:?} != {kb:?}"));
            }
            a.iter()
                .find_map(|(k, v)| json_diff(&format!("{path}.{k}"), v, &b[k], tol))
        }
        _ => (got != want).then(|| format!("{path}: {got} != {want}")),
    }
}

/// Compares `stdout` with `tests/golden/<name>.json`. Setting `UPDATE_GOLDEN`
/// rewrites the file instead.
pub fn check_golden(name: &str, stdout: &str) -> Result<(), String> {
    let path = golden_dir().join(format!("{name}.json"));
    let got: Value = serde_json::from_str(stdout).map_err(|e| format!("{name}: output is not JSON: {e}"))?;
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, stdout).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let want: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    match json_diff(name, &got, &want, GOLDEN_TOLERANCE) {
        None => Ok(()),
        Some(d) => Err(d),
    }
}

/// Parsing the report and printing it again must reproduce it exactly.
pub fn check_round_trip(stdout: &str) -> Result<(), String> {
    let v: Value = serde_json::from_str(stdout).map_err(|e| e.to_string())?;
    let mut again = serde_json::to_string_pretty(&v).map_err(|e| e.to_string())?;
    again.push('\n');
    if again == stdout {
        Ok(())
    } else {
        Err("re-emitted JSON differs from the original".into())
    }
}

/// The golden cases: subcommand invocations on model inputs and fixtures.
pub const GOLDEN_CASES: &[(&str, &[&str])] = &[
    ("entropy_uniform4", &["entropy", "uniform4.csv", "--json"]),
    ("entropy_counts", &["entropy", "counts.csv", "--base", "e", "--json"]),
    (
        "verify_connection_separable",
        &["verify-connection", "--model", "1,1", "--widths", "0.5", "--json"],
    ),
    (
        "steering_entangled",
        &["steering", "--model", "1,0.05", "--dx", "0.05", "--dk", "0.05", "--base", "e", "--json"],
    ),
    (
        "steering_scan",
        &[
            "steering", "--model", "1,0.5", "--dx", "0.4,0.2,0.1", "--dk", "0.4,0.2,0.1", "--scan", "--base", "e",
            "--json",
        ],
    ),
    (
        "steering_histograms",
        &["steering", "--x-hist", "x_corr.csv", "--k-hist", "k_corr.csv", "--json"],
    ),
    (
        "scan_normal",
        &["scan", "--model", "1,1", "--widths", "1", "--halvings", "3", "--base", "e", "--json"],
    ),
    ("probe_cmi_seed0", &["probe-cmi", "--seed", "0", "--base", "e", "--json"]),
];
