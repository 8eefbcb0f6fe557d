//! Manifest CSV (one row per estimate) and its text rendering.

use crate::error::CliError;
use etuq::uq::{relative_errors, Method, MomentEstimate};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub method: Method,
    pub level: Option<u32>,
    pub sweeps: Option<usize>,
    pub solver_calls: usize,
    #[serde(rename = "mean_K")]
    pub mean_k: f64,
    #[serde(rename = "std_K")]
    pub std_k: f64,
    pub rel_err_mean_pct: Option<f64>,
    pub rel_err_std_pct: Option<f64>,
}

impl ManifestRow {
    /// Row for `est`, with relative errors when a reference is given.
    pub fn new(est: &MomentEstimate, reference: Option<&MomentEstimate>) -> Result<Self, etuq::Error> {
        let errs = reference.map(|r| relative_errors(est, r)).transpose()?;
        Ok(ManifestRow {
            method: est.method,
            level: est.level,
            sweeps: est.sweeps,
            solver_calls: est.solver_calls,
            mean_k: est.mean,
            std_k: est.std,
            rel_err_mean_pct: errs.map(|e| e.0),
            rel_err_std_pct: errs.map(|e| e.1),
        })
    }

    fn sort_key(&self) -> (Method, Option<u32>, Option<usize>) {
        (self.method, self.level, self.sweeps)
    }
}

const HEADER: [&str; 8] = [
    "method",
    "level",
    "sweeps",
    "solver_calls",
    "mean_K",
    "std_K",
    "rel_err_mean_pct",
    "rel_err_std_pct",
];

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<(), CliError> {
    let out = |e: csv::Error| CliError::Output(format!("{}: {e}", path.display()));
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(out)?;
    w.write_record(HEADER).map_err(out)?;
    for r in rows {
        w.serialize(r).map_err(out)?;
    }
    w.flush().map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>, CliError> {
    let bad = |e: csv::Error| CliError::Config(format!("manifest {}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(bad)?;
    let header = r.headers().map_err(bad)?.clone();
    if !header.is_empty() && header.iter().ne(HEADER) {
        return Err(CliError::Config(format!(
            "manifest {}: unexpected columns {:?}",
            path.display(),
            header
        )));
    }
    r.deserialize().collect::<Result<Vec<ManifestRow>, _>>().map_err(bad)
}

fn percent(v: Option<f64>) -> String {
    match v {
        None => "-".into(),
        Some(v) if v < 1.0 => "<1.0".into(),
        Some(v) => format!("{v:.2}"),
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".into(), |v| v.to_string())
}

/// Aligned table sorted by method, level and sweeps.
pub fn render_report(rows: &[ManifestRow]) -> String {
    let mut rows = rows.to_vec();
    rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let head = ["method", "level", "sweeps", "calls", "mean [K]", "std [K]", "err mean [%]", "err std [%]"];
    let body: Vec<[String; 8]> = rows
        .iter()
        .map(|r| {
            [
                r.method.to_string(),
                opt(r.level),
                opt(r.sweeps),
                r.solver_calls.to_string(),
                format!("{:.4}", r.mean_k),
                format!("{:.4}", r.std_k),
                percent(r.rel_err_mean_pct),
                percent(r.rel_err_std_pct),
            ]
        })
        .collect();
    let mut width: Vec<usize> = head.iter().map(|h| h.chars().count()).collect();
    for cells in &body {
        for (w, c) in width.iter_mut().zip(cells) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&width)
            .enumerate()
            .map(|(k, (c, &w))| if k == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(head.to_vec());
    out += &line(width.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().iter().map(|s| s.as_str()).collect());
    for cells in &body {
        out += &line(cells.iter().map(|s| s.as_str()).collect());
    }
    out
}
