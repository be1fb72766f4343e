//! The result CSV shared with the plotting tools.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{BenchError, Result};

pub const HEADER: [&str; 8] = [
    "algorithm",
    "ltilde",
    "seed",
    "gradients",
    "epoch",
    "train_objective",
    "balanced_accuracy",
    "diverged",
];

/// One checkpoint of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub algorithm: String,
    pub ltilde: f64,
    pub seed: u64,
    /// Component-gradient evaluations so far.
    pub gradients: u64,
    /// `gradients / n`
    pub epoch: f64,
    pub train_objective: f64,
    /// Held-out balanced accuracy; absent for regression and diverged rows.
    pub balanced_accuracy: Option<f64>,
    pub diverged: bool,
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_rows<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.algorithm.clone(),
            format_float(r.ltilde),
            r.seed.to_string(),
            r.gradients.to_string(),
            format_float(r.epoch),
            format_float(r.train_objective),
            r.balanced_accuracy.map(format_float).unwrap_or_default(),
            r.diverged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    write_rows(rows, BufWriter::new(File::create(path)?))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize, line: u64) -> Result<T> {
    let raw = rec.get(k).unwrap_or("");
    raw.parse().map_err(|_| BenchError::Parse {
        line,
        msg: format!("bad {} value {raw:?}", HEADER[k]),
    })
}

/// Parses a result CSV; the header must match [`HEADER`] exactly.
pub fn read_rows<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(BenchError::Parse {
            line: 1,
            msg: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let acc = rec.get(6).unwrap_or("");
        rows.push(ResultRow {
            algorithm: rec.get(0).unwrap_or("").to_string(),
            ltilde: field(&rec, 1, line)?,
            seed: field(&rec, 2, line)?,
            gradients: field(&rec, 3, line)?,
            epoch: field(&rec, 4, line)?,
            train_objective: field(&rec, 5, line)?,
            balanced_accuracy: if acc.is_empty() { None } else { Some(field(&rec, 6, line)?) },
            diverged: field(&rec, 7, line)?,
        });
    }
    Ok(rows)
}
