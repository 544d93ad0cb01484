use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qinst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qinst")).args(args).output().unwrap()
}

fn example(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_prints_table() {
    let out = qinst(&["run", &example("z_then_x.json")]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("quantity"));
    for q in ["normalization", "p(0|+)", "p(1|-)", "correlation"] {
        assert!(text.contains(q), "missing {q} in\n{text}");
    }
}

#[test]
fn csv_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for i in 0..2 {
        let path = dir.path().join(format!("run{i}.csv"));
        let out = qinst(&["run", &example("lossy_intermediate.json"), "--csv", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert!(text.starts_with("quantity,re,im,numerator,denominator,warnings\n"));
}

#[test]
fn verify_reports_deviation_within_tolerance() {
    let out = qinst(&["verify", &example("lossy_intermediate.json")]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(!text.contains("VIOLATION"));
    let max: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("max deviation "))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(max <= 1e-10, "{max}");
}

#[test]
fn over_budget_is_a_validation_error() {
    let out = qinst(&["verify", &example("z_then_x.json"), "--budget", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn tampered_instrument_is_an_invariant_violation() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "tampered.json",
        r#"{
            "version": 1,
            "dim": 2,
            "stages": [ { "instrument": { "outcomes": [
                { "id": "a", "kraus": [[[1.05, 0], [0, 1]]] }
            ] } } ]
        }"#,
    );
    let out = qinst(&["run", &path]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let out = qinst(&["verify", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("VIOLATION"));
}

#[test]
fn schema_error_exits_with_validation_status() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "bad.json", r#"{ "version": 1, "dim": 2, "stages": [ { "laser": {} } ] }"#);
    let out = qinst(&["run", &path]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("stages[0]"), "{}", stderr(&out));
}

#[test]
fn missing_file_exits_with_validation_status() {
    let out = qinst(&["run", "/nonexistent/scenario.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_prints_one_row_per_strength() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = qinst(&[
        "sweep",
        &example("weak.json"),
        "--param",
        "eps",
        "--values",
        "0.2,0.1,0.05",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 2 + 3, "{text}");
    let rows = std::fs::read_to_string(csv).unwrap();
    assert_eq!(rows.lines().count(), 1 + 3);
}

#[test]
fn sweep_rejects_unknown_parameter() {
    let out = qinst(&["sweep", &example("weak.json"), "--param", "t", "--values", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_validation_status() {
    assert_eq!(qinst(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(qinst(&["--help"]).status.code(), Some(0));
}
