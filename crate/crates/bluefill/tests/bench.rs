use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use bluefill::bench::{run_plan, strip_wall_time, BenchOptions};
use bluefill::plan::ExperimentPlan;
use bluefill::Error;

fn small_plan() -> ExperimentPlan {
    ExperimentPlan::from_json_str(
        r#"{
            "n": 12,
            "correlation_levels": ["medium", "high"],
            "schemes": ["quasi_crystal", "random"],
            "ratios": [0.3, 0.6],
            "noise_levels": [0.0, 0.1],
            "algorithms": ["shrinkage"],
            "trials": 4,
            "base_seed": 11,
            "extra_sweeps": [{"correlation_levels": ["high"], "noise_levels": [0.0], "ratios": [0.3],
                              "algorithms": ["nonconvex", "hard"]}]
        }"#,
    )
    .unwrap()
}

fn opts(dir: &Path, jobs: usize) -> BenchOptions {
    BenchOptions { jobs, out_dir: dir.to_path_buf(), plot_data: true, progress: false }
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn records_are_reproducible_and_independent_of_parallelism() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let plan = small_plan();
    run_plan(&plan, &opts(a.path(), 1)).unwrap();
    run_plan(&plan, &opts(b.path(), 3)).unwrap();
    let (ra, rb) = (read(a.path(), "records.csv"), read(b.path(), "records.csv"));
    assert_eq!(strip_wall_time(&ra), strip_wall_time(&rb));
    assert_eq!(read(a.path(), "aggregates.csv"), read(b.path(), "aggregates.csv"));

    let reseeded = tempfile::tempdir().unwrap();
    run_plan(&ExperimentPlan { base_seed: 12, ..plan }, &opts(reseeded.path(), 1)).unwrap();
    assert_ne!(strip_wall_time(&ra), strip_wall_time(&read(reseeded.path(), "records.csv")));
}

#[test]
fn aggregates_match_brute_force_over_records() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_plan(&small_plan(), &opts(dir.path(), 2)).unwrap();
    assert_eq!(summary.records.len(), (2 * 2 * 2 * 2 + 2 * 2) * 4);

    // Recompute from the CSV text alone.
    let mut groups: BTreeMap<Vec<String>, Vec<f64>> = BTreeMap::new();
    let mut rdr = csv::Reader::from_path(dir.path().join("records.csv")).unwrap();
    for row in rdr.records() {
        let row = row.unwrap();
        let key: Vec<String> = (0..7).map(|i| row[i].to_string()).collect();
        let nmse: f64 = row[9].parse().unwrap();
        assert!(nmse >= 0.0 && nmse.is_finite());
        groups.entry(key).or_default().push(nmse);
    }
    let mut rdr = csv::Reader::from_path(dir.path().join("aggregates.csv")).unwrap();
    let mut seen = 0;
    for row in rdr.records() {
        let row = row.unwrap();
        let key: Vec<String> = (0..7).map(|i| row[i].to_string()).collect();
        let values = &groups[&key];
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
        let got_mean: f64 = row[8].parse().unwrap();
        let got_std: f64 = row[9].parse().unwrap();
        assert_eq!(row[7].parse::<usize>().unwrap(), values.len());
        assert!((got_mean - mean).abs() <= 1e-14 * mean.max(1e-300), "{key:?}");
        assert!((got_std - var.sqrt()).abs() <= 1e-12 * var.sqrt().max(1e-300), "{key:?}");
        seen += 1;
    }
    assert_eq!(seen, groups.len());
}

#[test]
fn single_cell_plan_aggregates_its_trials() {
    let dir = tempfile::tempdir().unwrap();
    let plan = ExperimentPlan::from_json_str(
        r#"{"n": 10, "correlation_levels": ["high"], "schemes": ["random"], "ratios": [0.5],
            "noise_levels": [0.05], "trials": 3}"#,
    )
    .unwrap();
    let summary = run_plan(&plan, &opts(dir.path(), 1)).unwrap();
    assert_eq!(summary.records.len(), 3);
    assert_eq!(summary.aggregates.len(), 1);
    let mean = summary.records.iter().map(|r| r.nmse).sum::<f64>() / 3.0;
    assert!((summary.aggregates[0].mean_nmse - mean).abs() <= 1e-15 * mean);
    assert!(summary.report.is_none());
    assert_eq!(read(dir.path(), "trends.csv").lines().count(), 1);
}

/// Headers and file layout of a bench run, as in `tests/golden/bench_layout.txt`.
fn layout(dir: &Path) -> String {
    let mut files: Vec<String> = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push(path.strip_prefix(dir).unwrap().to_string_lossy().into_owned());
            }
        }
    }
    files.sort();
    let mut out = String::new();
    for f in files {
        if f.ends_with(".csv") {
            let text = read(dir, &f);
            let mut lines = text.lines();
            out.push_str(&format!("{f}: {}\n", lines.next().unwrap()));
            if f.starts_with("tables/") {
                for line in lines {
                    out.push_str(&format!("  {}\n", line.split(',').next().unwrap()));
                }
            }
        } else {
            out.push_str(&format!("{f}\n"));
        }
    }
    out
}

#[test]
fn output_layout_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    run_plan(&small_plan(), &opts(dir.path(), 2)).unwrap();
    let golden = include_str!("golden/bench_layout.txt");
    let got = layout(dir.path());
    assert_eq!(got, golden, "\n--- got ---\n{got}");
}

#[test]
fn trends_cover_every_check_kind() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_plan(&small_plan(), &opts(dir.path(), 2)).unwrap();
    let report = summary.report.unwrap();
    for kind in bluefill_core::experiment::CheckKind::ALL {
        assert!(report.passed(kind).is_some(), "{kind:?}");
    }
    let trends = read(dir.path(), "trends.csv");
    assert_eq!(trends.lines().count(), report.comparisons.len() + 1);
}

#[test]
fn io_failure_keeps_finished_records() {
    let dir = tempfile::tempdir().unwrap();
    // A plain file where the tables directory should go.
    fs::write(dir.path().join("tables"), "").unwrap();
    let plan = small_plan();
    let err = run_plan(&plan, &opts(dir.path(), 1)).unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err}");
    let records = read(dir.path(), "records.csv");
    assert_eq!(records.lines().count(), 1 + plan.cells().unwrap().len() * plan.trials);
}

#[test]
fn invalid_plan_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let plan = ExperimentPlan { ratios: vec![0.0], ..small_plan() };
    assert!(matches!(run_plan(&plan, &opts(dir.path(), 1)), Err(Error::Invalid(_))));
    assert!(!dir.path().join("records.csv").exists());
}
