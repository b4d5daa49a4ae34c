//! Empirical CDFs and CSV output.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// Right-continuous empirical CDF: one `(x, F(x))` point per distinct value,
/// where `F(x)` is the fraction of samples `<= x`. NaNs are rejected.
pub fn empirical_cdf(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::domain("CDF of NaN samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, x) in sorted.iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *x => last.1 = f,
            _ => out.push((*x, f)),
        }
    }
    Ok(out)
}

/// Empirical quantile by the nearest-rank rule, `q` in `[0, 1]`.
pub fn quantile(samples: &[f64], q: f64) -> Option<f64> {
    if samples.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Some(sorted[rank - 1])
}

/// Writes `(x, F)` pairs under the given two column names.
pub fn write_cdf_csv<W: Write>(out: W, columns: [&str; 2], points: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns).map_err(csv_err)?;
    for (x, f) in points {
        w.write_record([x.to_string(), f.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::domain(e.to_string()))
}

/// Writes serializable rows under `header`, which must list the fields in
/// declaration order. An empty table still gets its header.
pub fn write_rows_csv<W: Write, T: Serialize>(out: W, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::domain(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::domain(format!("csv: {e}"))
}
