use std::path::PathBuf;
use std::process::{Command, Output};

use tempfile::TempDir;

fn turs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_turs"))
        .args(args)
        .output()
        .expect("run turs")
}

fn iris() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data/iris.csv")
        .to_string_lossy()
        .into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn fit_predict_inspect() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("model.json");
    let probs = dir.path().join("probs.csv");
    let model_s = model.to_str().unwrap();

    let out = turs(&["fit", "--data", &iris(), "--target", "species", "--out", model_s]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(json["format"], "turs-model");
    assert_eq!(json["version"], 1);

    let out = turs(&["predict", "--model", model_s, "--data", &iris(), "--out", probs.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&probs).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "setosa,versicolor,virginica,explanation");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 150);
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        let total: f64 = cells[..3].iter().map(|c| c.parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let case = cells[3].split(':').next().unwrap();
        assert!(["single", "union", "nested", "else"].contains(&case), "{row}");
    }

    let out = turs(&["inspect", "--model", model_s]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.lines().next().unwrap().starts_with("rule 0: IF "));
    assert!(text.contains(" THEN setosa="));
    assert!(text.contains("\nelse: "));
}

#[test]
fn regret_subcommand() {
    let out = turs(&["regret", "2", "2"]);
    assert!(out.status.success());
    // R(2, 2) = 1 + 1/4 + 1/4 + 1 = 2.5
    let value: f64 = stdout(&out).trim().parse().unwrap();
    assert!((value - 2.5f64.log2()).abs() < 1e-12);

    assert_eq!(turs(&["regret", "5", "0"]).status.code(), Some(2));
}

#[test]
fn input_errors_exit_with_2() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = turs(&["fit", "--data", missing.to_str().unwrap(), "--target", "y"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));

    let out = turs(&["fit", "--data", &iris(), "--target", "nope"]);
    assert_eq!(out.status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"format\": \"something else\"}").unwrap();
    let out = turs(&["inspect", "--model", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = turs(&["eval", "--data", &iris(), "--target", "species", "--alpha", "2"]);
    assert_eq!(out.status.code(), Some(2));

    // unknown flags are usage errors
    assert_eq!(turs(&["fit", "--bogus"]).status.code(), Some(2));
}

#[test]
fn eval_report_is_versioned_and_untimed() {
    let out = turs(&["eval", "--data", &iris(), "--target", "species", "--folds", "3", "--seed", "9"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["format"], "turs-eval-report");
    assert_eq!(report["version"], 1);
    assert_eq!(report["per_fold"].as_array().unwrap().len(), 3);
    assert_eq!(report["overlap_measured_on"], "test");
    assert!(report.get("total_fit_seconds").is_none());
    assert!(report["mean_auc"].as_f64().unwrap() > 0.9);

    let out = turs(&[
        "eval", "--data", &iris(), "--target", "species", "--folds", "3", "--include-timing", "--overlap-on", "train",
    ]);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(report["total_fit_seconds"].is_number());
    assert_eq!(report["overlap_measured_on"], "train");
}
