use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bernaudit::report::SCHEMA_VERSION;

fn bernaudit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bernaudit"))
        .args(args)
        .env("BERNAUDIT_OUTPUT_DIR", dir)
        .output()
        .expect("binary runs")
}

#[test]
fn bound_sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = bernaudit(
        dir.path(),
        &[
            "bound", "--corpus", "standard", "--n", "2..256", "--x-grid", "99", "--format", "csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("bound.csv")).unwrap();
    assert!(text.starts_with(&format!("# schema: {SCHEMA_VERSION}\n")));
    assert!(text.contains("# tool_version: "));
    assert!(text.contains("# quadrature: "));
    assert!(text.contains("\nlabel,x,y,n1,n2,delta,j,bound,ratio,pass,note\n"));
    let rows = text.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + 9 * 8 * 99);
    assert!(!text.contains(",false,"));
}

#[test]
fn missing_required_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bernaudit(dir.path(), &["sharpness"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn malformed_values_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["bound", "--corpus", "standard", "--n", "0..4"][..],
        &["bound", "--corpus", "standard", "--x", "1.5"],
        &["bound", "--function", "no_such_function"],
        &["bound", "--csv", "/nonexistent/samples.csv"],
        &["subgaussian", "--audit", "cosh", "--p", "0"],
    ] {
        let out = bernaudit(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn violations_set_exit_status_only_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["subgaussian", "--audit", "cosh", "--n", "1..256", "--p-default-grid"];
    let out = bernaudit(dir.path(), &args);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("subgaussian-cosh.json")).unwrap()).unwrap();
    assert_eq!(report["header"]["schema"], SCHEMA_VERSION);
    let r = &report["reports"][0];
    assert_eq!(r["inequality_id"], "cosh_mgf_log");
    assert!(r["cells_violating"].as_u64().unwrap() > 0);
    assert!(r["worst"]["margin"].as_f64().unwrap() > 0.0);
    assert!(r["all_margins"].is_null());

    let mut strict = args.to_vec();
    strict.push("--fail-on-violation");
    assert_eq!(bernaudit(dir.path(), &strict).status.code(), Some(1));
    let clean = ["subgaussian", "--audit", "cosh", "--p", "0.5", "--fail-on-violation"];
    assert_eq!(bernaudit(dir.path(), &clean).status.code(), Some(0));
}

#[test]
fn sampled_function_with_tabulated_modulus() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("tent.csv");
    let modulus = dir.path().join("tent_modulus.csv");
    let mut text = String::from("x,f\n");
    for k in 0..=100 {
        let x = k as f64 / 100.0;
        text.push_str(&format!("{x},{}\n", (x - 0.5).abs()));
    }
    fs::write(&samples, text).unwrap();
    fs::write(&modulus, "delta,omega\n0.5,0.5\n1,1\n").unwrap();
    let out_path = dir.path().join("out/tent.json");
    let out = bernaudit(
        dir.path(),
        &[
            "bound",
            "--csv",
            samples.to_str().unwrap(),
            "--modulus-csv",
            modulus.to_str().unwrap(),
            "--n",
            "4,16",
            "--x",
            "0.25,0.5",
            "--format",
            "json",
            "--output",
            out_path.to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    let records = v["records"].as_array().unwrap();
    assert_eq!(records.len(), 4);
    assert!(records.iter().all(|r| r["label"] == "tent" && r["pass"] == true));
    assert_eq!(v["summary"]["violations"], 0);
}

#[test]
fn repeated_runs_are_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["sharpness", "--experiment", "ratio", "--format", "json"];
    assert!(bernaudit(a.path(), &args).status.success());
    assert!(bernaudit(b.path(), &args).status.success());
    let name = "sharpness-ratio.json";
    assert_eq!(
        fs::read(a.path().join(name)).unwrap(),
        fs::read(b.path().join(name)).unwrap()
    );
}

#[test]
fn endpoints_are_flagged_and_skipped_in_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = bernaudit(
        dir.path(),
        &["bound", "--function", "sqrt", "--n", "8", "--x", "0.5", "--endpoints"],
    );
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("3 cells, 0 violations, 0 unconverged"), "{stdout}");
    let text = fs::read_to_string(dir.path().join("bound.csv")).unwrap();
    assert_eq!(text.matches(",undefined,true,endpoint").count(), 2);
}
