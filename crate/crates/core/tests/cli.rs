use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use weylcalc::cli::parse_operator_spec;
use weylcalc::operator::ParsedOperator;
use weylcalc::{Error, C64};

const OP_A: &str = r#"{"d":[[0,0],[1,0]],"a":[1,0]}"#;
const OP_B: &str = r#"{"d":[[0,0],[0,0],[1,0]],"a":[1,0]}"#;

fn weylcalc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weylcalc"))
        .args(args)
        .env("WEYLCALC_WORKDIR", dir)
        .env("SOURCE_DATE_EPOCH", "0")
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn parse_examples() {
    let a = parse_operator_spec(OP_A).unwrap();
    assert_eq!(a.base().a, C64::new(1.0, 0.0));
    assert_eq!(a.base().order(), 1);
    assert!(matches!(a, ParsedOperator::Weyl(_)));
    assert_eq!(parse_operator_spec(OP_B).unwrap().base().order(), 2);
    assert!(matches!(parse_operator_spec(r#"{"d":[[0,0]]}"#), Err(Error::ZeroOperator)));
    assert!(matches!(parse_operator_spec(r#"{"a":[1,0]}"#), Err(Error::MalformedSpec(_))));
    assert!(matches!(parse_operator_spec(r#"{"d":[[0,0],[1]]}"#), Err(Error::MalformedSpec(_))));
}

#[test]
fn parse_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("op.json");
    std::fs::write(&path, OP_B).unwrap();
    let op = parse_operator_spec(path.to_str().unwrap()).unwrap();
    assert_eq!(op.base().order(), 2);
    assert!(matches!(parse_operator_spec("/nonexistent/op.json"), Err(Error::IoFailure { .. })));
}

#[test]
fn commutator_check_example_a() {
    let dir = tempfile::tempdir().unwrap();
    let out = weylcalc(dir.path(), &["commutator-check", "--op", OP_A, "--ncap", "64"]);
    assert_eq!(out.status.code(), Some(0));
    let report = read_json(&dir.path().join("commutator.json"));
    let r = &report["result"];
    assert_eq!(r["a"][0].as_f64(), Some(1.0));
    assert!(r["off_diagonal_max"].as_f64().unwrap() <= 1e-12);
    assert!(r["absolute_off_diagonal_max"].as_f64().unwrap() <= 1e-12);
    assert_eq!(report["manifest"]["command"], "commutator-check");
    let csv = std::fs::read_to_string(dir.path().join("commutator_matrix.csv")).unwrap();
    assert!(csv.starts_with("row,col,re,im\n"));
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn kernel_example_b() {
    let dir = tempfile::tempdir().unwrap();
    let out = weylcalc(dir.path(), &["kernel", "--op", OP_B, "--terms", "40"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &read_json(&dir.path().join("kernel.json"))["result"];
    assert_eq!(r["solutions"].as_array().unwrap().len(), 2);
    assert!(r["residuals"].as_array().unwrap().iter().all(|x| x.as_f64().unwrap() <= 1e-10));
    assert_eq!(r["formal"], true);
    let csv = std::fs::read_to_string(dir.path().join("kernel_residuals.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("solution_index,residual"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn unknown_command_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = weylcalc(dir.path(), &["nonsense"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn zero_operator_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = weylcalc(dir.path(), &["kernel", "--op", r#"{"d":[[0,0]]}"#]);
    assert_eq!(out.status.code(), Some(2));
    let err = read_json(&dir.path().join("error.json"));
    assert_eq!(err["result"]["kind"], "ZeroOperator");
}

#[test]
fn unreachable_budget_is_validated_failure() {
    let dir = tempfile::tempdir().unwrap();
    let problem = r#"{"operator":{"d":[[0,0],[1,0]],"a":[1,0]},"targets":[{"label":"z^3","coeffs":[[0,0],[0,0],[0,0],[1,0]]}],"radius":1,"epsilon":1e-14}"#;
    let out = weylcalc(dir.path(), &["construct-orbit", "--problem", problem, "--lambdas", "6"]);
    assert_eq!(out.status.code(), Some(1));
    let err = read_json(&dir.path().join("error.json"));
    assert_eq!(err["result"]["kind"], "BudgetExceeded");
    assert_eq!(err["result"]["details"]["target"], 0);
    assert!(err["result"]["details"]["stage"].as_str().unwrap().starts_with("fit"));
}

#[test]
fn construct_orbit_writes_error_table() {
    let dir = tempfile::tempdir().unwrap();
    let problem = r#"{"operator":{"d":[[0,0],[1,0]],"a":[1,0]},"targets":[{"label":"1","coeffs":[[1,0]]},{"label":"z","coeffs":[[0,0],[1,0]]}],"radius":1,"epsilon":0.1}"#;
    let path = dir.path().join("problem.json");
    std::fs::write(&path, problem).unwrap();
    let out = weylcalc(dir.path(), &["construct-orbit", "--problem", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("orbit_errors.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "j,n_j,achieved_error,leakage_bound");
    assert_eq!(lines.len(), 3);
    let orbit = read_json(&dir.path().join("orbit.json"));
    assert_eq!(orbit["manifest"]["input_hashes"][0]["source"], path.to_str().unwrap());
    assert_eq!(orbit["result"]["verification"]["all_within_budget"], true);
}

#[test]
fn decompose_from_matrix_csv() {
    let dir = tempfile::tempdir().unwrap();
    let op = r#"{"d":[[0.5,0],[0,0],[2,-1]],"a":[0.25,0.5]}"#;
    let out = weylcalc(dir.path(), &["decompose", "--op", op, "--ncap", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let matrix = dir.path().join("matrix.csv");
    let sub = dir.path().join("again");
    let out = Command::new(env!("CARGO_BIN_EXE_weylcalc"))
        .args(["--out", sub.to_str().unwrap(), "decompose", "--matrix", matrix.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let r = &read_json(&sub.join("decompose.json"))["result"];
    let a = &r["operator"]["a"];
    assert!((a[0].as_f64().unwrap() - 0.25).abs() < 1e-12 && (a[1].as_f64().unwrap() - 0.5).abs() < 1e-12);
    let d = r["operator"]["d"].as_array().unwrap();
    assert_eq!(d.len(), 3);
    assert!((d[2][0].as_f64().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn decompose_rejects_non_weyl_matrix() {
    let dir = tempfile::tempdir().unwrap();
    // z^2 on 1, z, z^2, z^3
    let mut csv = String::from("row,col,re,im\n");
    for n in 0..4 {
        csv.push_str(&format!("{},{n},1,0\n", n + 2));
    }
    let path = dir.path().join("z2.csv");
    std::fs::write(&path, csv).unwrap();
    let out = weylcalc(dir.path(), &["decompose", "--matrix", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(read_json(&dir.path().join("error.json"))["result"]["kind"], "NotWeyl");
}

#[test]
fn complete_fit_curve_and_seeded_preset() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["complete-fit", "--op", OP_A, "--target", "0,1", "--preset", "gaussian-disk", "--seed", "5", "--sizes", "4,8"];
    let out = weylcalc(dir.path(), &args);
    assert_eq!(out.status.code(), Some(0));
    let first = std::fs::read(dir.path().join("residual_curve.csv")).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert_eq!(text.lines().next(), Some("target,k,residual_norm,condition_diag,ridge,status"));
    assert_eq!(text.lines().count(), 3);
    let fit = read_json(&dir.path().join("fit.json"));
    assert_eq!(fit["manifest"]["parameters"]["seed"], 5);
    weylcalc(dir.path(), &args);
    assert_eq!(std::fs::read(dir.path().join("residual_curve.csv")).unwrap(), first);
}

#[test]
fn eigencheck_explicit_lambdas() {
    let dir = tempfile::tempdir().unwrap();
    let out = weylcalc(dir.path(), &["eigencheck", "--op", OP_A, "--lambda", "0.5,-1", "--lambda", "-2"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &read_json(&dir.path().join("eigencheck.json"))["result"];
    let entries = r["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    assert_eq!(entries[0]["eigenvalue"][1].as_f64(), Some(-1.0));
    assert!(r["max_residual"].as_f64().unwrap() <= 1e-6);
}
