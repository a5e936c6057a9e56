use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use opanel::io::{default_covariate_names, write_dataset_csv};
use opanel::simulation::{replicate_dataset, SimScenario};

fn opanel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opanel")).args(args).output().unwrap()
}

fn data_file(dir: &Path) -> String {
    let data = replicate_dataset(&SimScenario::scenario2(), 120, 3).unwrap().data;
    let path = dir.join("d.csv");
    write_dataset_csv(&data, &default_covariate_names(2), &path).unwrap();
    path.to_str().unwrap().to_string()
}

/// Data lines of an emitted CSV, without the `#` preamble.
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn fit_writes_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = data_file(dir.path());
    let out = dir.path().join("fit");
    let res = opanel(&["fit", "--data", &data, "--cutpoints", "3,10", "--seed", "42", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let coef = csv_rows(&out.join("coefficients.csv"));
    assert_eq!(coef[0], ["covariate", "est", "se", "ci_low", "ci_high", "p_value"]);
    assert_eq!(coef.len() - 1, 2);
    let est: f64 = coef[1][1].parse().unwrap();
    assert!((est - 1.0).abs() < 0.3, "{est}");

    let base = csv_rows(&out.join("baseline.csv"));
    assert_eq!(base[1][0], "0");
    assert_eq!(base[1][1], "0");
    assert_eq!(base[1][2], "0");
    assert_eq!(base.len() - 1, 101);

    for f in ["coefficients.csv", "baseline.csv"] {
        let text = fs::read_to_string(out.join(f)).unwrap();
        assert!(text.starts_with("# opanel"));
        assert!(text.contains("# seed=42"));
        assert!(text.contains("\"interior_knots\":2"));
    }
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    assert_eq!(json["metadata"]["seed"], 42);
    assert_eq!(json["fit"]["converged"], true);
    assert!(json["inference"]["criteria"]["aic"].is_number());
    assert!(json["inference"]["criteria"]["bic"].is_number());
}

#[test]
fn fit_with_estimated_cutpoints_reports_them() {
    let dir = tempfile::tempdir().unwrap();
    let data = data_file(dir.path());
    let out = dir.path().join("fit");
    let res = opanel(&["fit", "--data", &data, "--estimate-cutpoints", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    let cuts = json["fit"]["cutpoints"].as_array().unwrap();
    assert_eq!(cuts.len(), 2);
    assert!(cuts[0].as_f64().unwrap() < cuts[1].as_f64().unwrap());
}

#[test]
fn bad_input_fails_with_row_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "subject_id,visit_time,response,x\na,1.0,1,0.5\na,1.0,2,0.5\n").unwrap();
    let res = opanel(&["fit", "--data", path.to_str().unwrap(), "--cutpoints", "2", "--out", "o"]);
    assert!(!res.status.success());
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn cutpoint_flags_are_exclusive_and_required() {
    let dir = tempfile::tempdir().unwrap();
    let data = data_file(dir.path());
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();
    assert!(!opanel(&["fit", "--data", &data, "--cutpoints", "3,10", "--estimate-cutpoints", "--out", o]).status.success());
    assert!(!opanel(&["fit", "--data", &data, "--out", o]).status.success());
}

#[test]
fn select_single_cell_wins() {
    let dir = tempfile::tempdir().unwrap();
    let data = data_file(dir.path());
    let out = dir.path().join("sel");
    let res = opanel(&[
        "select", "--data", &data, "--cutpoints", "3,10", "--mn-grid", "2", "--degree-grid", "3", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let rows = csv_rows(&out.join("selection.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[1][7..9], ["true", "true"]);
}

#[test]
fn simulate_writes_summary_in_table_layout() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("s.toml");
    fs::write(&sc, "preset = \"scenario1\"\nfrailty_var = 0.01\n").unwrap();
    let out = dir.path().join("sim");
    let res = opanel(&[
        "simulate", "--scenario", sc.to_str().unwrap(), "--n", "60", "--reps", "3", "--seed", "9", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let rows = csv_rows(&out.join("summary.csv"));
    assert_eq!(rows[0], ["n", "target", "true", "bias", "sd", "se", "cp", "mc_se"]);
    let targets: Vec<&str> = rows[1..].iter().map(|r| r[1].as_str()).collect();
    assert_eq!(targets, ["beta1", "beta2", "Lambda(2.5)", "Lambda(5.0)", "Lambda(7.5)"]);
    let curve = csv_rows(&out.join("curve.csv"));
    assert_eq!(curve[0], ["t", "true", "mean_estimate"]);
    assert!(fs::read_to_string(out.join("summary.csv")).unwrap().contains("# seed=9"));
}
