//! `key=value` reports and CSV tables.

use std::fmt::Display;
use std::io::Write;
use std::path::Path;

use dualguide_core::metrics::{ConsistencyReport, MetricReport};
use dualguide_core::oracle::BoundTrace;

use crate::error::{AppError, AppResult};
use crate::io::create;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn write(&self, path: &Path) -> AppResult<()> {
        let mut w = create(path)?;
        w.write_all(self.render().as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| AppError::io(path, e))
    }

    pub fn consistency(r: &ConsistencyReport) -> Self {
        let mut out = Self::new();
        out.push("sigma", r.sigma)
            .push("rho", r.rho)
            .push("kurtosis", r.kurtosis)
            .push("mean_drift", r.mean_drift)
            .push("max_token_drift", r.max_token_drift)
            .push("increments", r.increments)
            .push("zero", r.is_zero());
        for (k, s) in r.sigma_t.iter().enumerate() {
            out.push(format!("sigma_t.{k}"), s);
        }
        out
    }

    pub fn bound(b: &BoundTrace) -> Self {
        let mut out = Self::new();
        out.push("steps", b.pi.len())
            .push("active_steps", b.active_steps())
            .push("hold_fraction", b.hold_fraction())
            .push("total_reward", b.total_reward())
            .push("total_bound", b.total_bound());
        out
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub const METRIC_COLUMNS: [&str; 10] = [
    "samples",
    "pass_rate",
    "pass_se",
    "mean_total",
    "overshoot",
    "mean_violation",
    "unigram_kl",
    "dist2",
    "jaccard",
    "lambda_mean",
];

pub fn metric_cells(m: &MetricReport, lambda_mean: Option<f64>) -> Vec<String> {
    vec![
        m.samples.to_string(),
        m.pass_rate.to_string(),
        m.pass_se.to_string(),
        m.mean_total.to_string(),
        m.overshoot.to_string(),
        m.mean_violation.to_string(),
        opt(m.unigram_kl),
        m.dist2.to_string(),
        opt(m.jaccard),
        opt(lambda_mean),
    ]
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> AppResult<()> {
    let w = create(path)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(header)?;
    for r in rows {
        csv.write_record(r)?;
    }
    csv.flush().map_err(|e| AppError::io(path, e))
}
