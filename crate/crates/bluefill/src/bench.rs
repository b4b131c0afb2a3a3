//! Parallel execution of an [`ExperimentPlan`] and its CSV outputs.
//!
//! Output directory layout:
//!
//! ```text
//! run.json                       resolved plan, jobs, presets, timing
//! records.csv                    one row per trial
//! aggregates.csv                 one row per cell: mean, std, convergence rate
//! tables/schemes_<corr>_noise<v>_<algorithm>.csv     rows = schemes,    cols = ratios
//! tables/algorithms_<corr>_noise<v>_<scheme>.csv     rows = algorithms, cols = ratios
//! trends.csv                     ordering checks with margins
//! plot/<corr>_noise<v>_<algorithm>.csv                (with plot data enabled)
//! ```
//!
//! Records are appended cell by cell and flushed, so an aborted run leaves
//! every finished cell on disk.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::time::Instant;

use bluefill_core::experiment::{aggregate, compare_report, run_trial, Cell, CellAggregate, TrendReport};
use bluefill_core::field::{LENGTH_SCALE_HIGH, LENGTH_SCALE_LOW, LENGTH_SCALE_MEDIUM};
use bluefill_core::{CorrelationLevel, Scheme};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::write_json;
use crate::plan::ExperimentPlan;

pub const RECORD_HEADER: [&str; 14] = [
    "correlation",
    "scheme",
    "ratio",
    "noise",
    "algorithm",
    "p",
    "hard_rule",
    "trial",
    "seed",
    "nmse",
    "converged",
    "outer_iters",
    "inner_iters",
    "wall_time_s",
];

pub const AGGREGATE_HEADER: [&str; 11] = [
    "correlation",
    "scheme",
    "ratio",
    "noise",
    "algorithm",
    "p",
    "hard_rule",
    "trials",
    "mean_nmse",
    "std_nmse",
    "convergence_rate",
];

pub const TREND_HEADER: [&str; 7] = ["check", "passed", "margin", "better", "better_nmse", "worse", "worse_nmse"];

pub const PLOT_HEADER: [&str; 4] = ["series", "ratio", "mean_nmse", "std"];

#[derive(Debug, Clone)]
pub struct BenchOptions {
    /// Worker threads; 0 uses every available core.
    pub jobs: usize,
    pub out_dir: PathBuf,
    pub plot_data: bool,
    /// One line per finished cell on stderr.
    pub progress: bool,
}

impl BenchOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self { jobs: 0, out_dir: out_dir.into(), plot_data: false, progress: false }
    }
}

/// One trial of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub cell: Cell,
    pub trial: u64,
    pub seed: u64,
    pub nmse: f64,
    pub converged: bool,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub wall_time_s: f64,
    pub failure: Option<String>,
}

impl ExperimentRecord {
    fn fields(&self) -> [String; 14] {
        let c = &self.cell;
        [
            c.correlation.to_string(),
            c.scheme.to_string(),
            c.ratio.to_string(),
            c.noise.to_string(),
            c.algorithm.name().to_string(),
            c.algorithm.p.to_string(),
            c.algorithm.hard_rule.to_string(),
            self.trial.to_string(),
            self.seed.to_string(),
            self.nmse.to_string(),
            self.converged.to_string(),
            self.outer_iters.to_string(),
            self.inner_iters.to_string(),
            format!("{:.6}", self.wall_time_s),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct BenchSummary {
    pub records: Vec<ExperimentRecord>,
    pub aggregates: Vec<CellAggregate>,
    /// `None` when the plan has no comparable cells.
    pub report: Option<TrendReport>,
    pub wall_time_s: f64,
    pub jobs: usize,
}

#[derive(Serialize)]
struct RunHeader<'a> {
    command: &'a str,
    version: &'a str,
    plan: ExperimentPlan,
    cells: usize,
    records: usize,
    jobs: usize,
    length_scales: BTreeMap<&'static str, f64>,
    wall_time_s: f64,
}

pub fn length_scales() -> BTreeMap<&'static str, f64> {
    BTreeMap::from([("low", LENGTH_SCALE_LOW), ("medium", LENGTH_SCALE_MEDIUM), ("high", LENGTH_SCALE_HIGH)])
}

/// Runs every cell of `plan` and writes the outputs under `opts.out_dir`.
pub fn run_plan(plan: &ExperimentPlan, opts: &BenchOptions) -> Result<BenchSummary> {
    let cells = plan.cells()?;
    let settings = plan.settings();
    let resolved = plan.resolved()?;
    let jobs = if opts.jobs == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        opts.jobs
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {jobs} worker threads: {e}")))?;

    let out = &opts.out_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let records_path = out.join("records.csv");
    let mut writer = csv_writer(&records_path)?;
    write_row(&mut writer, &records_path, RECORD_HEADER)?;

    let started = Instant::now();
    let mut records = Vec::with_capacity(cells.len() * plan.trials);
    for (index, cell) in cells.iter().enumerate() {
        let cell_started = Instant::now();
        let batch: Vec<ExperimentRecord> = pool.install(|| {
            (0..plan.trials as u64)
                .into_par_iter()
                .map(|trial| {
                    let t0 = Instant::now();
                    let outcome = run_trial(cell, trial, &settings)?;
                    Ok(ExperimentRecord {
                        cell: *cell,
                        trial,
                        seed: outcome.seed,
                        nmse: outcome.nmse,
                        converged: outcome.converged,
                        outer_iters: outcome.outer_iters,
                        inner_iters: outcome.inner_iters,
                        wall_time_s: t0.elapsed().as_secs_f64(),
                        failure: outcome.failure,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })?;
        for rec in &batch {
            if let Some(msg) = &rec.failure {
                eprintln!("warning: {} trial {}: solver failed: {msg}", rec.cell, rec.trial);
            }
            write_row(&mut writer, &records_path, rec.fields())?;
        }
        writer.flush().map_err(|e| Error::io(&records_path, e))?;
        if opts.progress {
            let mean = batch.iter().map(|r| r.nmse).sum::<f64>() / batch.len() as f64;
            eprintln!(
                "[{}/{}] {cell}: mean nmse {mean:.4e} ({:.1} s)",
                index + 1,
                cells.len(),
                cell_started.elapsed().as_secs_f64()
            );
        }
        records.extend(batch);
    }
    drop(writer);

    let aggregates = aggregate(records.iter().map(|r| (&r.cell, r.nmse, r.converged)));
    write_aggregates(&out.join("aggregates.csv"), &aggregates)?;
    write_tables(&out.join("tables"), &aggregates)?;
    let report = compare_report(&aggregates).ok();
    write_trends(&out.join("trends.csv"), report.as_ref())?;
    if opts.plot_data {
        write_plot_data(&out.join("plot"), &aggregates)?;
    }
    let wall_time_s = started.elapsed().as_secs_f64();
    write_json(
        &out.join("run.json"),
        &RunHeader {
            command: "bench",
            version: env!("CARGO_PKG_VERSION"),
            plan: resolved,
            cells: cells.len(),
            records: records.len(),
            jobs,
            length_scales: length_scales(),
            wall_time_s,
        },
    )?;
    Ok(BenchSummary { records, aggregates, report, wall_time_s, jobs })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    File::create(path).map(csv::Writer::from_writer).map_err(|e| Error::io(path, e))
}

fn write_row<I, T>(w: &mut csv::Writer<File>, path: &Path, row: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| Error::io(path, e.into()))
}

fn write_aggregates(path: &Path, aggregates: &[CellAggregate]) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(&mut w, path, AGGREGATE_HEADER)?;
    for a in aggregates {
        let c = &a.cell;
        write_row(
            &mut w,
            path,
            [
                c.correlation.to_string(),
                c.scheme.to_string(),
                c.ratio.to_string(),
                c.noise.to_string(),
                c.algorithm.name().to_string(),
                c.algorithm.p.to_string(),
                c.algorithm.hard_rule.to_string(),
                a.trials.to_string(),
                a.mean_nmse.to_string(),
                a.std_nmse.to_string(),
                a.convergence_rate.to_string(),
            ],
        )?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn level_tag(level: CorrelationLevel) -> String {
    level.to_string().replace(':', "_")
}

/// Table of mean NMSE: one row per `label`, one column per ratio, for the
/// cells of one (correlation, noise) slice sharing `fixed`.
struct Table {
    name: String,
    row_header: &'static str,
    ratios: Vec<f64>,
    rows: Vec<(String, BTreeMap<u64, f64>)>,
}

impl Table {
    fn insert(&mut self, label: String, ratio: f64, mean: f64) {
        if !self.ratios.contains(&ratio) {
            self.ratios.push(ratio);
        }
        match self.rows.iter_mut().find(|(l, _)| *l == label) {
            Some((_, row)) => {
                row.insert(ratio.to_bits(), mean);
            }
            None => self.rows.push((label, BTreeMap::from([(ratio.to_bits(), mean)]))),
        }
    }

    fn write(mut self, dir: &Path) -> Result<()> {
        self.ratios.sort_by(f64::total_cmp);
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv_writer(&path)?;
        let header = std::iter::once(self.row_header.to_string()).chain(self.ratios.iter().map(f64::to_string));
        write_row(&mut w, &path, header)?;
        for (label, row) in &self.rows {
            let values = self
                .ratios
                .iter()
                .map(|r| row.get(&r.to_bits()).map(f64::to_string).unwrap_or_default());
            write_row(&mut w, &path, std::iter::once(label.clone()).chain(values))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))
    }
}

/// Scheme tables for every (correlation, noise, algorithm) and algorithm
/// tables for every (correlation, noise, scheme) run with two or more
/// algorithms.
fn write_tables(dir: &Path, aggregates: &[CellAggregate]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tables: Vec<Table> = Vec::new();
    let mut table = |name: String, row_header, label: String, a: &CellAggregate| {
        let t = match tables.iter_mut().position(|t| t.name == name) {
            Some(i) => &mut tables[i],
            None => {
                tables.push(Table { name, row_header, ratios: Vec::new(), rows: Vec::new() });
                tables.last_mut().unwrap()
            }
        };
        t.insert(label, a.cell.ratio, a.mean_nmse);
    };
    for a in aggregates {
        let c = &a.cell;
        let slice = format!("{}_noise{}", level_tag(c.correlation), c.noise);
        table(
            format!("schemes_{slice}_{}", algorithm_tag(c)),
            "scheme",
            c.scheme.to_string(),
            a,
        );
        table(format!("algorithms_{slice}_{}", c.scheme), "algorithm", c.algorithm.to_string(), a);
    }
    for t in tables {
        if t.row_header == "algorithm" && t.rows.len() < 2 {
            continue;
        }
        t.write(dir)?;
    }
    Ok(())
}

fn algorithm_tag(c: &Cell) -> String {
    match c.algorithm.name() {
        "hard_thresholding" => format!("hard_{}", c.algorithm.hard_rule),
        "nonconvex" => format!("nonconvex_p{}", c.algorithm.p),
        other => other.to_string(),
    }
}

fn write_trends(path: &Path, report: Option<&TrendReport>) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(&mut w, path, TREND_HEADER)?;
    for c in report.map(|r| r.comparisons.as_slice()).unwrap_or_default() {
        write_row(
            &mut w,
            path,
            [
                c.kind.name().to_string(),
                c.passed().to_string(),
                c.margin.to_string(),
                c.better.cell.to_string(),
                c.better.mean_nmse.to_string(),
                c.worse.cell.to_string(),
                c.worse.mean_nmse.to_string(),
            ],
        )?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One file per (correlation, noise, algorithm); one series per scheme.
fn write_plot_data(dir: &Path, aggregates: &[CellAggregate]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut figures: BTreeMap<String, Vec<(Scheme, f64, f64, f64)>> = BTreeMap::new();
    for a in aggregates {
        let c = &a.cell;
        let name = format!("{}_noise{}_{}", level_tag(c.correlation), c.noise, algorithm_tag(c));
        figures.entry(name).or_default().push((c.scheme, c.ratio, a.mean_nmse, a.std_nmse));
    }
    for (name, mut points) in figures {
        points.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let path = dir.join(format!("{name}.csv"));
        let mut w = csv_writer(&path)?;
        write_row(&mut w, &path, PLOT_HEADER)?;
        for (scheme, ratio, mean, std) in points {
            write_row(&mut w, &path, [scheme.to_string(), ratio.to_string(), mean.to_string(), std.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Records CSV with the trailing `wall_time_s` column removed, for
/// byte-level reproducibility checks.
pub fn strip_wall_time(records_csv: &str) -> String {
    let mut out = String::with_capacity(records_csv.len());
    for line in records_csv.lines() {
        let cut = line.rfind(',').unwrap_or(line.len());
        out.push_str(&line[..cut]);
        out.push('\n');
    }
    out
}

/// Convenience for tests and scripts: read a file produced by [`run_plan`].
pub fn read_output(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
}
