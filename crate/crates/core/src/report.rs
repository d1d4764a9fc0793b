//! Flat output rows shared by `analyze`, `simulate` and `compare`.
//!
//! Columns, in order: `quantity, type_index, env_state, t, value, stderr, method`.
//! Empty cells mean "all types", "mixed over the initial law",
//! "stationary" and "exact" respectively.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::Analyzer;
use crate::error::{Error, Result};
use crate::measures::performance_report;
use crate::transient::TransformPoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub quantity: String,
    pub type_index: Option<usize>,
    pub env_state: Option<usize>,
    pub t: Option<f64>,
    pub value: f64,
    pub stderr: Option<f64>,
    pub method: String,
}

/// Identity of a row for matching analytic values against estimates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowKey {
    pub quantity: String,
    pub type_index: Option<usize>,
    pub env_state: Option<usize>,
    pub t: Option<u64>,
}

impl ReportRow {
    pub fn new(quantity: impl Into<String>, type_index: Option<usize>, t: Option<f64>, value: f64, method: &str) -> Self {
        ReportRow { quantity: quantity.into(), type_index, env_state: None, t, value, stderr: None, method: method.to_string() }
    }

    pub fn key(&self) -> RowKey {
        RowKey {
            quantity: self.quantity.clone(),
            type_index: self.type_index,
            env_state: self.env_state,
            t: self.t.map(f64::to_bits),
        }
    }
}

impl std::fmt::Display for RowKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.quantity)?;
        if let Some(r) = self.type_index {
            write!(f, " type={r}")?;
        }
        if let Some(i) = self.env_state {
            write!(f, " state={i}")?;
        }
        if let Some(t) = self.t {
            write!(f, " t={}", f64::from_bits(t))?;
        }
        Ok(())
    }
}

pub fn pgf_busy(z: f64) -> String {
    format!("pgf_busy(z={z})")
}

pub fn pgf_stationary(z: f64) -> String {
    format!("pgf_stationary(z={z})")
}

pub fn lst_alpha(s: f64) -> String {
    format!("lst_alpha(s={s})")
}

pub fn pgf_kept(z: f64) -> String {
    format!("pgf_kept(z={z})")
}

pub fn delta_name(c: usize) -> String {
    format!("delta_c{c}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (csv or json)")),
        }
    }
}

pub fn write_rows<W: Write>(rows: &[ReportRow], format: Format, out: W) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["quantity", "type_index", "env_state", "t", "value", "stderr", "method"])
                .map_err(csv_error)?;
            let opt = |x: Option<String>| x.unwrap_or_default();
            for r in rows {
                w.write_record([
                    r.quantity.clone(),
                    opt(r.type_index.map(|v| v.to_string())),
                    opt(r.env_state.map(|v| v.to_string())),
                    opt(r.t.map(|v| v.to_string())),
                    r.value.to_string(),
                    opt(r.stderr.map(|v| v.to_string())),
                    r.method.clone(),
                ])
                .map_err(csv_error)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows).map_err(|e| Error::Io(e.into()))?;
            writeln!(out)?;
        }
    }
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn read_json_rows(text: &str) -> Result<Vec<ReportRow>> {
    serde_json::from_str(text).map_err(|e| Error::Io(e.into()))
}

/// What `analyze` evaluates besides the fixed measures.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticRequest {
    pub z_points: Vec<f64>,
    pub s_points: Vec<f64>,
    /// Emit the transient mean path at about this many evenly spaced nodes.
    pub path_points: usize,
    pub with_pmf: bool,
}

impl Default for AnalyticRequest {
    fn default() -> Self {
        AnalyticRequest { z_points: vec![0.3, 0.6, 0.9], s_points: vec![0.5, 1.0], path_points: 100, with_pmf: true }
    }
}

/// Rows for the performance report and the requested transform values. The
/// transient transforms are taken at the model horizon.
pub fn analytic_rows(analyzer: &Analyzer<'_>, request: &AnalyticRequest) -> Result<Vec<ReportRow>> {
    let model = analyzer.model();
    let method = analyzer.method().name();
    let k = model.types();
    let comps = model.components();
    let grid = *model.grid();
    let horizon = grid.horizon();
    let n = grid.steps();
    let rep = performance_report(analyzer, request.with_pmf)?;
    let mut rows = Vec::new();

    let stride = (n / request.path_points.max(1)).max(1);
    let mut nodes: Vec<usize> = (0..=n).step_by(stride).collect();
    if nodes.last() != Some(&n) {
        nodes.push(n);
    }
    let total = rep.omega_total();
    for &node in &nodes {
        let t = Some(grid.time(node));
        for r in 0..k {
            rows.push(ReportRow::new("omega", Some(r), t, rep.omega[r][node], method));
        }
        rows.push(ReportRow::new("omega", None, t, total[node], method));
        for c in 0..comps {
            let all: f64 = (0..k).map(|r| model.resources().arrival_mean(r, c) * rep.omega[r][node]).sum();
            rows.push(ReportRow::new(delta_name(c), None, t, all, method));
        }
    }

    let kp = &rep.kpis;
    for r in 0..k {
        rows.push(ReportRow::new("L_q", Some(r), None, kp.l_q[r], "integral"));
        rows.push(ReportRow::new("L_los", Some(r), None, kp.l_los[r], "integral"));
        rows.push(ReportRow::new("L_los_rate", Some(r), None, kp.l_los_rate[r], "integral"));
        for c in 0..comps {
            rows.push(ReportRow::new(delta_name(c), Some(r), None, kp.delta[r][c], "integral"));
        }
    }
    rows.push(ReportRow::new("L_q", None, None, kp.l_q_total(), "integral"));
    rows.push(ReportRow::new("L_los", None, None, kp.l_los_total(), "integral"));
    rows.push(ReportRow::new("L_los_rate", None, None, kp.l_los_rate_total(), "integral"));
    for (c, v) in kp.delta_total().into_iter().enumerate() {
        rows.push(ReportRow::new(delta_name(c), None, None, v, "integral"));
    }
    rows.push(ReportRow::new("tail_bound", None, None, kp.tail_bound, "integral"));

    for &z in &request.z_points {
        let pt = TransformPoint::busy_scalar(Complex64::new(z, 0.0), k, comps);
        let tr = analyzer.transient(&pt)?;
        rows.push(ReportRow::new(pgf_busy(z), None, Some(horizon), tr.mixed[n].re, method));
        for (i, path) in tr.per_state.iter().enumerate() {
            let mut row = ReportRow::new(pgf_busy(z), None, Some(horizon), path[n].re, method);
            row.env_state = Some(i);
            rows.push(row);
        }
        rows.push(ReportRow::new(pgf_stationary(z), None, None, analyzer.stationary(&pt)?.re, method));
    }
    for &s in &request.s_points {
        let pt = TransformPoint::busy(vec![Complex64::new(1.0, 0.0); k], vec![s; comps]);
        rows.push(ReportRow::new(lst_alpha(s), None, Some(horizon), analyzer.transient(&pt)?.mixed[n].re, method));
    }
    if let Some(pmf) = &rep.pmf {
        for (j, p) in pmf.probs.iter().enumerate() {
            rows.push(ReportRow::new(format!("pmf[{j}]"), None, None, *p, method));
        }
        rows.push(ReportRow::new("pmf_tail", None, None, pmf.tail, method));
    }
    Ok(rows)
}
