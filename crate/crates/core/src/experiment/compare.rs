use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::io::read_samples;
use super::run::{BudgetSummary, Manifest};
use crate::error::{Error, Result};
use crate::metrics::mmd_to_reference;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub run: String,
    pub method: String,
    pub final_mmd: f64,
    pub online_evals: u64,
    pub offline_evals: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
    /// `(run, method, iteration, mmd)`.
    pub curves: Vec<(String, String, u64, f64)>,
}

fn checkpoints(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(it) = name
            .strip_prefix("particles_")
            .and_then(|s| s.strip_suffix(".csv"))
            .and_then(|s| s.parse::<u64>().ok())
        {
            out.push((it, path));
        }
    }
    out.sort();
    Ok(out)
}

/// MMD of every checkpoint of every run against `reference`.
pub fn compare_runs(runs: &[PathBuf], reference: &Path) -> Result<Comparison> {
    if runs.is_empty() {
        return Err(Error::invalid("nothing to compare"));
    }
    let reference_samples = read_samples(reference)?;
    let mut shared = None;
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for dir in runs {
        let manifest = Manifest::load(&dir.join("manifest.json"))?;
        let key = (manifest.config.problem, manifest.config.particles);
        match shared {
            None => shared = Some(key),
            Some(k) if k != key => {
                return Err(Error::invalid(format!(
                    "{} does not share problem and particle count with the first run",
                    dir.display()
                )))
            }
            _ => {}
        }
        let budget_path = dir.join("budget.json");
        let text = std::fs::read_to_string(&budget_path).map_err(|e| Error::io(&budget_path, e))?;
        let budget: BudgetSummary = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: budget_path.clone(),
            source: e,
        })?;
        let name = dir.display().to_string();
        let method = manifest.config.method.name().to_string();
        let mut last = None;
        for (it, path) in checkpoints(dir)? {
            let v = mmd_to_reference(&read_samples(&path)?, &reference_samples)?;
            curves.push((name.clone(), method.clone(), it, v));
            last = Some(v);
        }
        let final_mmd =
            last.ok_or_else(|| Error::invalid(format!("{} has no checkpoints", dir.display())))?;
        rows.push(CompareRow {
            run: name,
            method,
            final_mmd,
            online_evals: budget.online_evals,
            offline_evals: budget.offline_evals,
            wall_time_s: budget.wall_time_s,
        });
    }
    Ok(Comparison { rows, curves })
}

impl Comparison {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut w = csv::Writer::from_path(dir.join("comparison.csv"))?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(dir, e))?;
        let mut w = csv::Writer::from_path(dir.join("mmd_curves.csv"))?;
        w.write_record(["run", "method", "iteration", "mmd"])?;
        for (run, method, it, v) in &self.curves {
            w.write_record([run.as_str(), method.as_str(), &it.to_string(), &v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(dir, e))
    }
}
