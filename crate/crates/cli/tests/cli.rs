use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

use regadj::{fit_ols, parse_formula, Dataset};
use serde_json::Value;
use tempfile::NamedTempFile;

const HAND_CSV: &str = "a,y,X1\n1,3,1\n1,4,2\n1,6,3\n0,1,1\n0,2,2\n0,2,3\n";

fn regadj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regadj")).args(args).output().expect("binary runs")
}

fn csv_file(contents: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

fn path(f: &NamedTempFile) -> &str {
    f.path().to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("valid JSON")
}

#[test]
fn anova_is_difference_in_means() {
    let f = csv_file(HAND_CSV);
    let v = json(&regadj(&["estimate", "--data", path(&f), "--model", "1 + A", "--format", "json"]));
    let expected = 13.0 / 3.0 - 5.0 / 3.0;
    assert!((v["ate_hat"].as_f64().unwrap() - expected).abs() < 1e-12);
    assert_eq!(v["n"], 6);
}

#[test]
fn anhecova_matches_library_fit() {
    let f = csv_file(HAND_CSV);
    let v = json(&regadj(&["estimate", "--data", path(&f), "--model", "1 + A + X1 + A:X1", "--format", "json"]));
    let data = Dataset::from_rows(
        vec![1, 1, 1, 0, 0, 0],
        &[vec![1.0], vec![2.0], vec![3.0], vec![1.0], vec![2.0], vec![3.0]],
        vec![3.0, 4.0, 6.0, 1.0, 2.0, 2.0],
    )
    .unwrap();
    let fit = fit_ols(&parse_formula("1 + A + X1 + A:X1", &["X1".to_string()]).unwrap(), &data).unwrap();
    assert!((v["ate_hat"].as_f64().unwrap() - fit.ate_hat).abs() < 1e-12);
    assert!((v["ate_se"].as_f64().unwrap() - fit.ate_se).abs() < 1e-12);
    let terms: Vec<&str> = v["coefficients"].as_array().unwrap().iter().map(|c| c["term"].as_str().unwrap()).collect();
    assert_eq!(terms, ["1", "A", "X1", "A:X1"]);
}

#[test]
fn fixed_coefficients_and_known_mean() {
    let f = csv_file(HAND_CSV);
    let o = regadj(&[
        "estimate", "--data", path(&f), "--model", "1 + A + X1@1", "--centering", "known-mean", "--mu", "2", "--pi", "0.5",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("fixed"));
    assert!(text.contains("known-pi"));
    assert!(text.contains("known-mean"));
}

#[test]
fn estimate_pi_warns() {
    let f = csv_file(HAND_CSV);
    let o = regadj(&["estimate", "--data", path(&f), "--model", "1 + A", "--estimate-pi"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn weights_column_selects_weighted_fit() {
    let f = csv_file("a,y,X1,w\n1,3,1,1\n1,4,2,2\n1,6,3,1\n0,1,1,1\n0,2,2,3\n0,2,3,1\n");
    let v = json(&regadj(&["estimate", "--data", path(&f), "--model", "1 + A", "--format", "json"]));
    assert_eq!(v["method"], "weighted-ols");
    let expected = (3.0 + 8.0 + 6.0) / 4.0 - (1.0 + 6.0 + 2.0) / 5.0;
    assert!((v["ate_hat"].as_f64().unwrap() - expected).abs() < 1e-12);
}

#[test]
fn bad_treatment_value_cites_line() {
    let f = csv_file("a,y,X1\n1,3,1\n0,4,2\n2,6,3\n");
    let o = regadj(&["estimate", "--data", path(&f), "--model", "1 + A"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
}

#[test]
fn malformed_inputs_exit_2() {
    let f = csv_file("a,y,X1\n1,3,1\n0,abc,2\n");
    let o = regadj(&["estimate", "--data", path(&f), "--model", "1 + A"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let f = csv_file("a,X1\n1,3\n");
    assert_eq!(regadj(&["estimate", "--data", path(&f), "--model", "1 + A"]).status.code(), Some(2));

    let f = csv_file(HAND_CSV);
    assert_eq!(regadj(&["estimate", "--data", path(&f), "--model", "1 + X1"]).status.code(), Some(2));
    assert_eq!(regadj(&["estimate", "--data", "/nonexistent.csv", "--model", "1 + A"]).status.code(), Some(2));
    assert_eq!(
        regadj(&["estimate", "--data", path(&f), "--model", "1 + A + X1", "--centering", "known-mean"]).status.code(),
        Some(2)
    );
}

#[test]
fn singular_fit_exits_3() {
    let f = csv_file("a,y,X1\n1,3,1\n1,4,1\n0,6,1\n0,6,1\n");
    let o = regadj(&["estimate", "--data", path(&f), "--model", "1 + A + X1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("X1"));
}

#[test]
fn check_reference_pairs() {
    let verdict = |m1: &str, m2: &str| {
        json(&regadj(&["check", "--model", m1, "--model2", m2, "--pi", "0.3", "--format", "json"]))["verdict"]
            .as_str()
            .unwrap()
            .to_string()
    };
    assert_eq!(verdict("1+A+X+A:X", "1+A"), "Dominates");
    assert_eq!(verdict("1+A+X", "1+A"), "NotGuaranteed");
    assert_eq!(verdict("1+A+X", "1+A+X+A:X"), "NotGuaranteed");
    let o = regadj(&["check", "--model", "1+A", "--model2", "1 + A", "--pi", "0.3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_known_mean_and_names() {
    let o = regadj(&[
        "check", "--model", "1 + A + A:Y0 + A:X2", "--model2", "1 + A", "--pi", "0.3", "--centering", "known-mean",
        "--covariates", "Y0,X2",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("Dominates"));
}

#[test]
fn compare_population_json() {
    let f = csv_file(
        r#"{"pi": 0.3, "moments": {"sigma": [[1.0]], "omega1": [2.5], "omega0": [1.0], "mu1": 5.0, "mu0": 3.0, "ey2_1": 32.25, "ey2_0": 11.0}}"#,
    );
    let v = json(&regadj(&["compare", "--population", path(&f), "--model", "1+A+X+A:X", "--model2", "1+A", "--format", "json"]));
    let v1 = 1.0 / 0.7 + 1.0 / 0.3 + 2.25;
    let v2 = 7.25 / 0.3 + 2.0 / 0.7;
    assert!((v["model1"]["variance"].as_f64().unwrap() - v1).abs() < 1e-9);
    assert!((v["model2"]["variance"].as_f64().unwrap() - v2).abs() < 1e-9);
    assert!((v["gap_formula"].as_f64().unwrap() - (v2 - v1)).abs() < 1e-9);
    assert_eq!(v["verdict"]["verdict"], "Dominates");
}

#[test]
fn simulate_scenario3_shape() {
    let o = regadj(&["simulate", "--scenario", "3", "--models", "1+A+X+A:X,1+A", "--reps", "50", "--n", "200", "--seed", "7"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "scenario,model,pi,n,reps,bias,sd,mc_se,fail_rate");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("3,1+A+X+A:X,,200,50,"));
}

#[test]
fn simulate_is_reproducible_across_threads() {
    let run = |threads: &str| {
        stdout(&regadj(&[
            "simulate", "--scenario", "1", "--pis", "0.1:0.9:0.1", "--reps", "20", "--n", "100", "--seed", "3", "--threads", threads,
        ]))
    };
    let one = run("1");
    assert_eq!(one.lines().count(), 1 + 27);
    assert_eq!(one, run("4"));
}

#[test]
fn simulate_json_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = regadj(&[
        "simulate", "--scenario", "did-ldv", "--reps", "30", "--n", "200", "--format", "json", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(Path::new(&out)).unwrap()).unwrap();
    let models: Vec<&str> = v.as_array().unwrap().iter().map(|c| c["model"].as_str().unwrap()).collect();
    assert_eq!(models, ["DiD", "LDV"]);
}

#[test]
fn simulate_validation() {
    assert_eq!(regadj(&["simulate", "--scenario", "1", "--reps", "0"]).status.code(), Some(2));
    assert_eq!(regadj(&["simulate", "--scenario", "7"]).status.code(), Some(2));
    assert_eq!(regadj(&["simulate", "--scenario", "1", "--pis", "0.5:0.1:0.1"]).status.code(), Some(2));
    assert_eq!(regadj(&["simulate", "--scenario", "1", "--models", "1 + A + Z"]).status.code(), Some(2));
}

#[test]
fn table1_json_is_stable() {
    let a = regadj(&["table1", "--pi", "0.5", "--corollaries", "--format", "json"]);
    let b = regadj(&["table1", "--pi", "0.5", "--corollaries", "--format", "json"]);
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["table1"]["rows"].as_array().unwrap().len(), 5);
    assert_eq!(v["corollaries"].as_array().unwrap().len(), 3);
}
