use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_stur-threshold");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn error_category(out: &Output) -> String {
    let v: Value = serde_json::from_slice(&out.stderr).expect("structured error on stderr");
    v["error"].as_str().unwrap().to_string()
}

#[test]
fn simulate_then_estimate_recovers_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "simulate", "--n", "500", "--c", "1", "--phi", "0.25", "--seed", "2",
        ],
    );
    ok(
        d,
        &["estimate", "--data", "sample.csv", "--out", "est.json"],
    );
    let v = json(&d.join("est.json"));
    assert_eq!(v["schema"], "stur-threshold/estimate/v1");
    assert_eq!(v["provenance"]["timestamp"], "2023-11-14T22:13:20Z");
    assert_eq!(v["result"]["n"], 500);
    let g = v["result"]["gamma_hat"].as_f64().unwrap();
    assert!((g - 0.25).abs() < 0.1, "gamma_hat {g}");
}

#[test]
fn test_and_ivx_and_persistence_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &["simulate", "--preset", "null", "--n", "200", "--seed", "5"],
    );
    ok(
        d,
        &[
            "fit-persistence",
            "--data",
            "sample.csv",
            "--out",
            "fit.json",
        ],
    );
    let fit = json(&d.join("fit.json"));
    assert!(fit["result"]["fit"]["converged"].as_bool().unwrap());
    ok(
        d,
        &[
            "test",
            "--data",
            "sample.csv",
            "--persistence",
            "fit.json",
            "--cv-steps",
            "200",
            "--cv-reps",
            "200",
            "--out",
            "test.json",
        ],
    );
    let t = json(&d.join("test.json"));
    let tests = t["result"]["tests"].as_array().unwrap();
    assert_eq!(tests.len(), 2);
    for e in tests {
        let p = e["pvalue"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert_eq!(e["critical_values"].as_array().unwrap().len(), 3);
    }
    ok(
        d,
        &[
            "ivx",
            "--data",
            "sample.csv",
            "--correct",
            "--c",
            "1",
            "--phi",
            "0.25",
            "--out",
            "ivx.json",
        ],
    );
    let i = json(&d.join("ivx.json"));
    assert_eq!(i["result"]["corrected"], true);
    assert!(i["result"]["se1"][0].as_f64().unwrap() > 0.0);
}

#[test]
fn critvals_are_byte_identical_across_runs_and_threads() {
    let outputs: Vec<Vec<u8>> = ["1", "4", "1"]
        .into_iter()
        .map(|threads| {
            let dir = tempfile::tempdir().unwrap();
            ok(
                dir.path(),
                &[
                    "critvals",
                    "--functional",
                    "ols-h2",
                    "--c",
                    "2",
                    "--phi",
                    "0.25",
                    "--steps",
                    "200",
                    "--reps",
                    "300",
                    "--seed",
                    "11",
                    "--threads",
                    threads,
                    "--out",
                    "cv.csv",
                ],
            );
            fs::read(dir.path().join("cv.csv")).unwrap()
        })
        .collect();
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    assert!(text.contains("# functional=sup-wald-ols-h2"));
    assert!(text.contains("# timestamp=2023-11-14T22:13:20Z"));
}

#[test]
fn exit_codes_follow_error_categories() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csv = String::from("y,x1,q\n");
    for t in 0..60 {
        csv.push_str(&format!("{},{},1.5\n", (t as f64).sin(), t));
    }
    fs::write(d.join("flat.csv"), csv).unwrap();
    let out = run(
        d,
        &["analyze", "--data", "flat.csv", "--c", "1", "--phi", "0"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_category(&out), "data");

    fs::write(d.join("short.csv"), "y,x1,q\n1,2,3\n").unwrap();
    let out = run(d, &["estimate", "--data", "short.csv"]);
    assert_eq!(out.status.code(), Some(3));

    fs::write(d.join("bad.toml"), "[estimate]\nwindow = 3\n").unwrap();
    let out = run(
        d,
        &["--config", "bad.toml", "estimate", "--data", "short.csv"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_category(&out), "config");

    ok(d, &["simulate", "--n", "100"]);
    let out = run(d, &["test", "--data", "sample.csv", "--critvals", "tables"]);
    assert_eq!(out.status.code(), Some(5));
    assert_eq!(error_category(&out), "missing-critical-values");
}

#[test]
fn config_file_layers_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("run.toml"),
        "seed = 3\n[simulate]\nn = 80\nout = \"cfg.csv\"\n",
    )
    .unwrap();
    ok(d, &["--config", "run.toml", "simulate"]);
    let rows = fs::read_to_string(d.join("cfg.csv")).unwrap();
    assert!(rows.contains("# seed=3"));
    assert_eq!(rows.lines().filter(|l| !l.starts_with('#')).count(), 82);
    ok(d, &["--config", "run.toml", "simulate", "--n", "50"]);
    let rows = fs::read_to_string(d.join("cfg.csv")).unwrap();
    assert_eq!(rows.lines().filter(|l| !l.starts_with('#')).count(), 52);
}

#[test]
fn supplied_tables_are_used() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--n", "150", "--preset", "null"]);
    ok(
        d,
        &[
            "critvals",
            "--functional",
            "ivx-h2",
            "--steps",
            "200",
            "--reps",
            "300",
            "--out",
            "ivx.csv",
        ],
    );
    ok(
        d,
        &[
            "test",
            "--data",
            "sample.csv",
            "--estimators",
            "ivx",
            "--critvals",
            "tables",
            "--tables",
            "ivx.csv",
            "--out",
            "t.json",
        ],
    );
    let t = json(&d.join("t.json"));
    let src = t["result"]["tests"][0]["pvalue_source"].as_str().unwrap();
    assert!(src.starts_with("sup-wald-ivx-h2"), "{src}");
}

#[test]
fn mc_summary_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "mc",
            "--kind",
            "size",
            "--n",
            "100",
            "--c",
            "1",
            "--c",
            "10",
            "--phi",
            "0.25",
            "--reps",
            "40",
            "--cv-steps",
            "200",
            "--cv-reps",
            "200",
            "--seed",
            "1",
            "--out",
            "mc",
        ],
    );
    let got = fs::read_to_string(d.join("mc/summary.md")).unwrap();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mc_size_summary.md");
    assert_eq!(got, fs::read_to_string(golden).unwrap());
    let csv = fs::read_to_string(d.join("mc/result.csv")).unwrap();
    let back = stur_threshold::mc::parse_csv(&csv).unwrap();
    assert_eq!(back.records.len(), 4);
}
