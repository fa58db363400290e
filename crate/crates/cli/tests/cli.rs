use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sar"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = sar(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn schema() -> jsonschema::Validator {
    let text = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/test_report.schema.json")).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_valid(report: &Value) {
    let v = schema();
    let errors: Vec<String> = v.iter_errors(report).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}\n{report:#}");
}

#[test]
fn gen_writes_requested_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let p = path.to_str().unwrap();
    ok(&["gen", "--regime", "gaussian2d", "--n", "100", "--tau", "0.5", "--seed", "7", "--out", p]);
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x1,y");
    assert_eq!(lines.len(), 101);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 2));
    assert!(dir.path().join("d.csv.manifest.json").exists());
}

#[test]
fn gen_to_stdout_matches_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    ok(&["gen", "--n", "30", "--tau", "0.2", "--seed", "3", "--out", path.to_str().unwrap()]);
    let stdout = ok(&["gen", "--n", "30", "--tau", "0.2", "--seed", "3"]).stdout;
    assert_eq!(stdout, fs::read(&path).unwrap());
}

#[test]
fn gen_every_regime() {
    for (regime, cols) in [
        ("transformed", 4),
        ("cluster-pruned", 2),
        ("heteroscedastic", 2),
        ("homoscedastic", 2),
    ] {
        let out = ok(&["gen", "--regime", regime, "--n", "50", "--p", if cols == 4 { "3" } else { "1" }, "--tau", "0.3"]);
        let text = String::from_utf8(out.stdout).unwrap();
        assert_eq!(text.lines().count(), 51, "{regime}");
        assert_eq!(text.lines().next().unwrap().split(',').count(), cols, "{regime}");
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(sar(&["gen", "--n", "10", "--tau", "1.5"]).status.code(), Some(2));
    assert_eq!(sar(&["gen", "--tau", "0.5"]).status.code(), Some(2));
    assert_eq!(sar(&["test", "--input", "x.csv", "--eta", "1.5"]).status.code(), Some(2));
    assert_eq!(sar(&["sweep", "--out", "o", "--methods", "lasso/resub"]).status.code(), Some(2));
    assert_eq!(sar(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn exact_line_rejects_with_degenerate_f() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("line.csv");
    let rows: String = (0..10).map(|i| format!("{i},{}\n", 3 * i - 2)).collect();
    fs::write(&input, format!("x1,y\n{rows}")).unwrap();
    let out = ok(&["test", "--input", input.to_str().unwrap()]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid(&report);
    assert_eq!(report["sar"]["reject_null"], Value::Bool(true));
    assert_eq!(report["f_test"]["degenerate"], Value::Bool(true));
    assert_eq!(report["f_test"]["F_star"], Value::Null);
    let orig = &report["coefficients_original_scale"];
    assert!((orig["slope"][0].as_f64().unwrap() - 3.0).abs() < 1e-12);
    assert!((orig["intercept"].as_f64().unwrap() + 2.0).abs() < 1e-12);
}

#[test]
fn null_data_does_not_reject() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("null.csv");
    let report_path = dir.path().join("report.json");
    ok(&["gen", "--n", "200", "--tau", "0", "--seed", "11", "--out", input.to_str().unwrap()]);
    for regressor in ["ols", "svr-l1", "svr-l2"] {
        ok(&[
            "test",
            "--input",
            input.to_str().unwrap(),
            "--regressor",
            regressor,
            "--eta",
            "0.5",
            "--out",
            report_path.to_str().unwrap(),
        ]);
        let report: Value = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
        assert_valid(&report);
        assert_eq!(report["sar"]["reject_null"], Value::Bool(false), "{regressor}");
        assert_eq!(report["regressor"], Value::String(regressor.into()));
        assert!(dir.path().join("report.json.manifest.json").exists());
    }
}

#[test]
fn mesh_threshold_and_multiple_predictors() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p3.csv");
    ok(&["gen", "--regime", "transformed", "--p", "3", "--n", "80", "--tau", "0.7", "--seed", "2", "--out", input.to_str().unwrap()]);
    let out = ok(&["test", "--input", input.to_str().unwrap(), "--threshold", "mesh", "--predictors", "x1,x3"]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid(&report);
    assert_eq!(report["p"], 2);
    assert_eq!(report["sar"]["threshold_mode"], "mesh");
}

#[test]
fn runtime_errors_are_structured() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("flat.csv");
    fs::write(&input, "x1,y\n1,1\n1,2\n1,3\n1,4\n").unwrap();
    let out = sar(&["test", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid(&report);
    assert_eq!(report["error"]["kind"], "ConstantColumn");

    let out = sar(&["test", "--input", input.to_str().unwrap(), "--response", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["error"]["kind"], "MissingColumn");
}

fn read_csv_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

#[test]
fn minimal_sweep_gives_one_row_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    fs::write(&cfg, "taus = 0.3\nsample_sizes = 40\nrealizations = 2\nmethods = ols/resub\nseed = 1\n").unwrap();
    let out_dir = dir.path().join("out");
    ok(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    for name in ["risks.csv", "power.csv", "fold_variance.csv"] {
        assert_eq!(read_csv_rows(&out_dir.join(name)).len(), 2, "{name}");
    }
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "sweep");
    assert_eq!(manifest["master_seed"], 1);
    assert_eq!(manifest["config"]["realizations"], 2);
}

#[test]
fn grid_sweep_cardinality_and_json_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    fs::write(
        &cfg,
        r#"{"taus": [0.0, 0.4, 0.8], "sample_sizes": [20, 60], "realizations": 3,
            "methods": ["ols/resub", "svr-l2/kfold5", "svr-l1/loo", "svr-l2/sar"], "master_seed": 4}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    ok(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(read_csv_rows(&out_dir.join("power.csv")).len(), 1 + 3 * 2 * 4);
}

#[test]
fn sweep_with_only_failing_cells_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = sar(&[
        "sweep", "--taus", "0", "--ns", "5", "--realizations", "2", "--methods", "ols/kfold10", "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("failed cell"));
    assert!(out_dir.join("risks.csv").exists());
}

#[test]
fn unknown_config_key_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "colour = blue\n").unwrap();
    let out = sar(&["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
