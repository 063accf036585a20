//! End-to-end run through the command-line front end: simulate a dataset,
//! fit the persistence parameters, then analyze it.

use std::path::Path;

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["stur-threshold"];
    full.extend_from_slice(args);
    stur_threshold::cli::run(full)
}

fn main() {
    let dir = std::env::temp_dir().join("stur-threshold-analyze");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let p = |f: &str| dir.join(f).to_string_lossy().into_owned();
    let (data, pers, out) = (p("sample.csv"), p("persistence.json"), p("analysis.json"));

    assert_eq!(
        run(&["simulate", "--n", "300", "--c", "2", "--phi", "0.5", "--seed", "9", "--out", &data]),
        0
    );
    assert_eq!(
        run(&["fit-persistence", "--data", &data, "--out", &pers]),
        0
    );
    let code = run(&[
        "analyze",
        "--data",
        &data,
        "--persistence",
        &pers,
        "--cv-steps",
        "500",
        "--cv-reps",
        "500",
        "--out",
        &out,
    ]);
    println!("analyze exited with {code}");
    if Path::new(&out).exists() {
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        for t in v["result"]["tests"].as_array().unwrap() {
            println!(
                "{:<5} {:<30} sup = {:>8.3}  p = {}",
                t["estimator"].as_str().unwrap_or(""),
                t["hypothesis"].as_str().unwrap_or(""),
                t["sup"].as_f64().unwrap_or(f64::NAN),
                t["pvalue"]
            );
        }
    }
}
