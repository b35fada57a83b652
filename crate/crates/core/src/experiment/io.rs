use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Columns `iteration, particle, x0, x1, ...`.
pub fn write_particles(path: &Path, iteration: u64, points: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["iteration".to_string(), "particle".to_string()];
    header.extend((0..points.cols()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for (i, row) in points.iter_rows().enumerate() {
        let mut rec = vec![iteration.to_string(), i.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads the `x*` columns of a particle CSV.
pub fn read_samples(path: &Path) -> Result<Matrix> {
    let mut r = csv::Reader::from_path(path)?;
    let cols: Vec<usize> = r
        .headers()?
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with('x'))
        .map(|(i, _)| i)
        .collect();
    if cols.is_empty() {
        return Err(Error::invalid(format!(
            "{} has no coordinate columns",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = cols
            .iter()
            .map(|&c| {
                rec[c].parse::<f64>().map_err(|e| {
                    Error::invalid(format!("{}: bad number {:?}: {e}", path.display(), &rec[c]))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
