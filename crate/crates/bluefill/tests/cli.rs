use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bluefill_core::diagnostics::{diagnose, energy_fraction, DEFAULT_RANK_TOL};
use bluefill_core::{generate_field, CorrelationLevel};
use serde_json::Value;

fn bluefill(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bluefill")).current_dir(dir).args(args).output().unwrap()
}

fn header(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

#[test]
fn version_lists_length_scales() {
    let dir = tempfile::tempdir().unwrap();
    let out = bluefill(dir.path(), &["--version"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("low=13.5 medium=37.7 high=171.3"), "{text}");
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["gen-field", "--out", "f.csv", "--bogus"][..],
        &["frobnicate"],
        &["gen-mask", "--scheme", "hexagonal", "--ratio", "0.1", "--out", "m.csv"],
        &["gen-mask", "--scheme", "random", "--ratio", "1.5", "--out", "m.csv"],
        &["gen-field", "--level", "lukewarm", "--out", "f.csv"],
        &["solve", "--field", "missing.csv", "--mask", "missing.csv", "--out", "e.csv"],
    ] {
        let out = bluefill(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(bluefill(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn numerical_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("huge.csv"), "1e300,3e300\n-2e300,5e299\n").unwrap();
    let out = bluefill(dir.path(), &["diagnose", "--field", "huge.csv"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gen_field_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| ["gen-field", "--n", "64", "--level", "high", "--seed", "1", "--out", out];
    let a = bluefill(dir.path(), &args("a.csv"));
    let b = bluefill(dir.path(), &args("b.csv"));
    assert!(a.status.success() && b.status.success());
    assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), fs::read(dir.path().join("b.csv")).unwrap());
    let h = header(&a);
    assert_eq!(h["seed"], 1);
    assert_eq!(h["length_scale"], 171.3);
    // The written field is the library's field, bit for bit.
    let field = generate_field(64, CorrelationLevel::High, 1).unwrap();
    let read = bluefill::io::read_matrix(&dir.path().join("a.csv")).unwrap();
    assert_eq!(read, field.values);
}

#[test]
fn binary_and_noisy_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bluefill(
        dir.path(),
        &["gen-field", "--n", "16", "--level", "low", "--noise", "0.1", "--noisy-out", "y.bin", "--out", "x.bin"],
    );
    assert!(out.status.success());
    let x = bluefill::io::read_matrix(&dir.path().join("x.bin")).unwrap();
    let y = bluefill::io::read_matrix(&dir.path().join("y.bin")).unwrap();
    assert_eq!(x.shape(), (16, 16));
    assert_ne!(x, y);
    assert!(header(&out)["noise_seed"].is_u64());
    // --noise without somewhere to put the noisy field is a usage error.
    let out = bluefill(dir.path(), &["gen-field", "--noise", "0.1", "--out", "z.csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn field_mask_solve_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(bluefill(d, &["gen-field", "--n", "24", "--level", "high", "--seed", "3", "--out", "f.csv"]).status.success());
    let mask = bluefill(d, &["gen-mask", "--n", "24", "--scheme", "quasi_crystal", "--ratio", "0.4", "--seed", "2", "--out", "m.csv"]);
    assert!(mask.status.success());
    assert_eq!(header(&mask)["cells"], 230);
    let sidecar: Value = serde_json::from_str(&fs::read_to_string(d.join("m.json")).unwrap()).unwrap();
    assert_eq!(sidecar["scheme"], "quasi_crystal");

    let out = bluefill(
        d,
        &["solve", "--field", "f.csv", "--mask", "m.csv", "--p", "1", "--sigma", "auto", "--out", "est.csv", "--trace", "trace.csv", "--truth", "f.csv"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let h = header(&out);
    assert_eq!(h["result"]["converged"], true);
    assert!(h["result"]["nmse"].as_f64().unwrap() < 0.05);
    assert!(h["solver"]["lambda_init"]["value"].as_f64().unwrap() > 0.0);
    let est = bluefill::io::read_matrix(&d.join("est.csv")).unwrap();
    assert_eq!(est.shape(), (24, 24));
    let trace = fs::read_to_string(d.join("trace.csv")).unwrap();
    assert!(trace.starts_with("outer,inner,lambda,objective,residual\n"));
    assert!(trace.lines().count() > 2);

    // Rerunning from the echoed configuration reproduces the estimate.
    let lambda = h["solver"]["lambda_init"]["value"].as_f64().unwrap().to_string();
    let sigma = h["solver"]["sigma"].as_f64().unwrap().to_string();
    let again = bluefill(
        d,
        &["solve", "--field", "f.csv", "--mask", "m.csv", "--p", "1", "--sigma", &sigma, "--lambda", &lambda, "--out", "est2.csv"],
    );
    assert!(again.status.success());
    assert_eq!(fs::read(d.join("est.csv")).unwrap(), fs::read(d.join("est2.csv")).unwrap());

    let hard = bluefill(d, &["solve", "--field", "f.csv", "--mask", "m.csv", "--algorithm", "hard", "--hard-rule", "derived", "--out", "h.bin"]);
    assert!(hard.status.success());
    assert_eq!(header(&hard)["solver"]["hard_rule"], "derived");
    let conflict = bluefill(d, &["solve", "--field", "f.csv", "--mask", "m.csv", "--p", "1", "--algorithm", "hard", "--out", "x.csv"]);
    assert_eq!(conflict.status.code(), Some(1));
}

#[test]
fn diagnose_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = bluefill(dir.path(), &["diagnose", "--n", "64", "--level", "high", "--seed", "5", "--top-k", "6"]);
    assert!(out.status.success());
    let h = header(&out);
    let field = generate_field(64, CorrelationLevel::High, 5).unwrap();
    let diag = diagnose(&field.values, DEFAULT_RANK_TOL).unwrap();
    assert!(close(h["coherence_mu"].as_f64().unwrap(), diag.coherence_mu));
    assert_eq!(h["numeric_rank"], diag.numeric_rank);
    let fractions = h["energy_fractions"].as_array().unwrap();
    assert_eq!(fractions.len(), 6);
    for (k, entry) in fractions.iter().enumerate() {
        assert_eq!(entry["k"], k + 1);
        assert!(close(entry["fraction"].as_f64().unwrap(), energy_fraction(&diag, k + 1).unwrap()));
    }

    // Same numbers from a field file.
    let gen = bluefill(dir.path(), &["gen-field", "--n", "64", "--level", "high", "--seed", "5", "--out", "f.bin"]);
    assert!(gen.status.success());
    let from_file = header(&bluefill(dir.path(), &["diagnose", "--field", "f.bin"]));
    assert!(close(from_file["coherence_mu"].as_f64().unwrap(), diag.coherence_mu));
}

#[test]
fn bench_writes_documented_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("plan.json"),
        r#"{"n": 12, "correlation_levels": ["high"], "schemes": ["random", "farthest_point"],
            "ratios": [0.3, 0.6], "noise_levels": [0.0], "trials": 50}"#,
    )
    .unwrap();
    let out = bluefill(d, &["bench", "--plan", "plan.json", "--trials", "2", "--out", "results", "--jobs", "2", "--quiet", "--plot-data"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let h = header(&out);
    assert_eq!(h["records"], 8);
    assert_eq!(h["plan"]["trials"], 2);
    let records = fs::read_to_string(d.join("results/records.csv")).unwrap();
    assert_eq!(records.lines().count(), 9);
    for name in ["aggregates.csv", "trends.csv", "run.json", "tables/schemes_high_noise0_shrinkage.csv", "plot/high_noise0_shrinkage.csv"] {
        assert!(d.join("results").join(name).exists(), "{name}");
    }
    let bad = bluefill(d, &["bench", "--plan", "plan.json", "--trials", "0", "--out", "r2"]);
    assert_eq!(bad.status.code(), Some(1));
}
