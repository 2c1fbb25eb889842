use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use eigdecon::DeconvReport;
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::config::ExperimentConfig;
use crate::experiment::Outcome;

/// Contents of `report.json`.
#[derive(Serialize)]
pub struct ReportFile<'a> {
    pub config: &'a ExperimentConfig,
    pub report: &'a DeconvReport,
    pub max_abs_error: Option<f64>,
    pub tolerance: Option<f64>,
    pub passed: Option<bool>,
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(w.into_inner()?)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_outcome(dir: &Path, out: &Outcome, tolerance: Option<f64>) -> anyhow::Result<Vec<PathBuf>> {
    let max = out.max_error();
    let file = ReportFile {
        config: &out.config,
        report: &out.report,
        max_abs_error: max,
        tolerance,
        passed: tolerance.zip(max).map(|(t, m)| m <= t),
    };
    let mut written = Vec::new();
    let path = dir.join("report.json");
    write_atomic(&path, &serde_json::to_vec_pretty(&file)?)?;
    written.push(path);

    let rows = out.rows.iter().map(|r| {
        vec![opt(r.true_x), r.recovered_x.to_string(), opt(r.abs_error), r.weight.to_string()]
    });
    let path = dir.join("recovered.csv");
    write_atomic(&path, &csv_bytes(&["true_x", "recovered_x", "abs_error", "weight"], rows)?)?;
    written.push(path);

    if let Some(h) = out.histogram()? {
        let path = dir.join("histogram.csv");
        let rows = h.into_iter().map(|(c, n)| vec![c.to_string(), n.to_string()]);
        write_atomic(&path, &csv_bytes(&["bin_center", "count"], rows)?)?;
        written.push(path);
    }
    Ok(written)
}

/// `sweep.csv`, rewritten atomically after every completed row.
pub struct SweepTable {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl SweepTable {
    pub fn new(path: PathBuf, spikes: usize) -> Self {
        let mut header = vec!["value".to_string()];
        header.extend((1..=spikes).map(|k| format!("error_{k}")));
        header.push("median_error".into());
        Self { path, header, rows: Vec::new() }
    }

    pub fn push(&mut self, value: &str, errors: Option<&[f64]>) -> anyhow::Result<()> {
        let width = self.header.len() - 2;
        let mut row = vec![value.to_string()];
        match errors {
            Some(e) => {
                row.extend(e.iter().map(|v| v.to_string()));
                row.resize(width + 1, String::new());
                row.push(median(e).map(|m| m.to_string()).unwrap_or_default());
            }
            None => row.resize(width + 2, String::new()),
        }
        self.rows.push(row);
        self.flush()
    }

    pub fn flush(&self) -> anyhow::Result<()> {
        let header: Vec<&str> = self.header.iter().map(String::as_str).collect();
        write_atomic(&self.path, &csv_bytes(&header, self.rows.iter().cloned())?)
    }
}

pub fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) })
}
