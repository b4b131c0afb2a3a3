//! On-disk formats.
//!
//! * matrices: headerless CSV (one grid row per line) or the binary layout
//!   `[u32 rows][u32 cols][rows·cols f64]`, all little-endian, row-major;
//!   the `.bin` extension selects binary,
//! * masks: CSV `row,col` (0-based) plus a JSON sidecar
//!   `{scheme, rows, cols, ratio, seed}` at the same path with `.json`,
//! * solver traces: CSV `outer,inner,lambda,objective,residual`.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use bluefill_core::solver::TraceRow;
use bluefill_core::{Matrix, SamplingMask, Scheme};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("bin") => MatrixFormat::Binary,
            _ => MatrixFormat::Csv,
        }
    }
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    match MatrixFormat::from_path(path) {
        MatrixFormat::Csv => read_matrix_csv(path),
        MatrixFormat::Binary => read_matrix_bin(path),
    }
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    match MatrixFormat::from_path(path) {
        MatrixFormat::Csv => write_matrix_csv(path, m),
        MatrixFormat::Binary => write_matrix_bin(path, m),
    }
}

pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    let mut w = create(path)?;
    let mut line = String::new();
    for i in 0..m.rows() {
        line.clear();
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            // `{}` prints the shortest string that parses back to the same bits.
            line.push_str(&v.to_string());
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::invalid(format!("{}:{}: not a number: {field:?}", path.display(), lineno + 1))
            })?;
            data.push(v);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::invalid(format!(
                    "{}:{}: expected {c} values, found {width}",
                    path.display(),
                    lineno + 1
                )))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::invalid(format!("{}: empty matrix file", path.display())))?;
    Ok(Matrix::from_vec(rows, cols, data)?)
}

pub fn write_matrix_bin(path: &Path, m: &Matrix) -> Result<()> {
    let rows = u32::try_from(m.rows()).map_err(|_| Error::invalid("matrix too large for binary format"))?;
    let cols = u32::try_from(m.cols()).map_err(|_| Error::invalid("matrix too large for binary format"))?;
    let mut bytes = Vec::with_capacity(8 + 8 * m.as_slice().len());
    bytes.extend_from_slice(&rows.to_le_bytes());
    bytes.extend_from_slice(&cols.to_le_bytes());
    for v in m.as_slice() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_matrix_bin(path: &Path) -> Result<Matrix> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 {
        return Err(Error::invalid(format!("{}: truncated header", path.display())));
    }
    let rows = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = &bytes[8..];
    if body.len() != rows * cols * 8 {
        return Err(Error::invalid(format!(
            "{}: header says {rows}x{cols} but body holds {} bytes",
            path.display(),
            body.len()
        )));
    }
    let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(Matrix::from_vec(rows, cols, data)?)
}

/// Reproducibility sidecar of a mask file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskHeader {
    pub scheme: Scheme,
    pub rows: usize,
    pub cols: usize,
    pub ratio: f64,
    pub seed: u64,
}

impl MaskHeader {
    pub fn of(mask: &SamplingMask) -> Self {
        Self {
            scheme: mask.scheme(),
            rows: mask.rows(),
            cols: mask.cols(),
            ratio: mask.target_ratio(),
            seed: mask.seed(),
        }
    }
}

/// `m.csv` → `m.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_mask(path: &Path, mask: &SamplingMask) -> Result<()> {
    let mut w = create(path)?;
    let mut text = String::from("row,col\n");
    for &(r, c) in mask.indices() {
        text.push_str(&format!("{r},{c}\n"));
    }
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))?;
    write_json(&sidecar_path(path), &MaskHeader::of(mask))
}

/// Reads a mask and its sidecar. Without a sidecar the grid shape must come
/// from `shape` (typically the field being masked); the scheme is then
/// unknown and recorded as `random` with seed 0.
pub fn read_mask(path: &Path, shape: Option<(usize, usize)>) -> Result<SamplingMask> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cells = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with(|c: char| c.is_ascii_alphabetic())) {
            continue;
        }
        let parsed = line.split_once(',').and_then(|(r, c)| {
            Some((r.trim().parse::<usize>().ok()?, c.trim().parse::<usize>().ok()?))
        });
        match parsed {
            Some(cell) => cells.push(cell),
            None => {
                return Err(Error::invalid(format!(
                    "{}:{}: expected `row,col`, found {line:?}",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    let sidecar = sidecar_path(path);
    let header: Option<MaskHeader> = if sidecar.exists() { Some(read_json(&sidecar)?) } else { None };
    let (rows, cols, scheme, ratio, seed) = match (&header, shape) {
        (Some(h), Some(s)) if (h.rows, h.cols) != s => {
            return Err(Error::invalid(format!(
                "mask {} is {}x{} but the field is {}x{}",
                path.display(),
                h.rows,
                h.cols,
                s.0,
                s.1
            )))
        }
        (Some(h), _) => (h.rows, h.cols, h.scheme, h.ratio, h.seed),
        (None, Some((r, c))) => (r, c, Scheme::Random, cells.len() as f64 / (r * c) as f64, 0),
        (None, None) => {
            return Err(Error::invalid(format!(
                "mask {} has no sidecar {} and no grid shape was given",
                path.display(),
                sidecar.display()
            )))
        }
    };
    Ok(SamplingMask::from_indices(rows, cols, cells, scheme, ratio, seed)?)
}

pub const TRACE_HEADER: [&str; 5] = ["outer", "inner", "lambda", "objective", "residual"];

pub fn write_trace(path: &Path, trace: &[TraceRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| Error::io(path, e.into());
    w.write_record(TRACE_HEADER).map_err(csv_err)?;
    for row in trace {
        w.write_record([
            row.outer.to_string(),
            row.inner.to_string(),
            row.lambda.to_string(),
            row.objective.to_string(),
            row.residual.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::invalid(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}
