//! z-scores of analytic values against simulation estimates.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::report::{ReportRow, RowKey};

use super::EstimateSet;

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub key: RowKey,
    pub analytic: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub threshold: f64,
    pub items: Vec<Comparison>,
}

impl ComparisonReport {
    pub fn all_pass(&self) -> bool {
        self.items.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Comparison> {
        self.items.iter().filter(|c| !c.pass)
    }

    /// One row per estimate: `value` is the z-score, `stderr` the simulation SE.
    pub fn rows(&self) -> Vec<ReportRow> {
        self.items
            .iter()
            .map(|c| ReportRow {
                quantity: c.key.quantity.clone(),
                type_index: c.key.type_index,
                env_state: c.key.env_state,
                t: c.key.t.map(f64::from_bits),
                value: c.z,
                stderr: Some(c.stderr),
                method: if c.pass { "z-score PASS".into() } else { "z-score FAIL".into() },
            })
            .collect()
    }
}

/// `z = (analytic - estimate) / SE` for every estimate row; `PASS` iff `|z| <= threshold`.
/// A zero standard error gives `z = 0` on exact agreement and an infinite score otherwise.
pub fn compare(estimates: &EstimateSet, analytic: &[ReportRow], threshold: f64) -> Result<ComparisonReport> {
    let index: BTreeMap<RowKey, f64> = analytic.iter().map(|r| (r.key(), r.value)).collect();
    let mut items = Vec::with_capacity(estimates.rows.len());
    for est in &estimates.rows {
        let key = est.key();
        let a = *index.get(&key).ok_or_else(|| Error::LabelMismatch(key.to_string()))?;
        let se = est.stderr.unwrap_or(0.0);
        let diff = a - est.value;
        let z = if diff == 0.0 {
            0.0
        } else if se > 0.0 {
            diff / se
        } else {
            f64::INFINITY.copysign(diff)
        };
        items.push(Comparison { key, analytic: a, estimate: est.value, stderr: se, z, pass: z.abs() <= threshold });
    }
    Ok(ComparisonReport { threshold, items })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(value: f64, se: f64) -> EstimateSet {
        let mut r = ReportRow::new("L_q", None, None, value, "simulation");
        r.stderr = Some(se);
        EstimateSet {
            seed: 0,
            replications: 2,
            horizon: 1.0,
            rows: vec![r],
            events: 0,
            conservation_checks: 0,
            conservation_violations: 0,
            catastrophes: 0,
            terminal_histogram: vec![],
        }
    }

    #[test]
    fn identical_inputs_pass() {
        let a = [ReportRow::new("L_q", None, None, 1.0, "integral")];
        let rep = compare(&set(1.0, 0.1), &a, 3.0).unwrap();
        assert_eq!(rep.items[0].z, 0.0);
        assert!(rep.all_pass());
    }

    #[test]
    fn five_standard_errors_fail() {
        let a = [ReportRow::new("L_q", None, None, 1.0, "integral")];
        let rep = compare(&set(0.9, 0.02), &a, 3.0).unwrap();
        assert!((rep.items[0].z - 5.0).abs() < 1e-9);
        assert!(!rep.all_pass());
    }

    #[test]
    fn missing_label() {
        let a = [ReportRow::new("L_los", None, None, 1.0, "integral")];
        assert!(matches!(compare(&set(1.0, 0.1), &a, 3.0), Err(Error::LabelMismatch(_))));
    }
}
