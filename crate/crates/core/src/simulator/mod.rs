//! Monte-Carlo oracle: independent replications of the full model.
//!
//! Replication `n` draws from `ChaCha8Rng::seed_from_u64(seed)` with stream
//! `2n`; Bernoulli thinning uses stream `2n + 1`. Results are merged in
//! replication order, so an estimate set is a pure function of
//! `(model, options)`.

mod compare;
mod engine;

pub use compare::{compare, Comparison, ComparisonReport};
pub use engine::RunRecord;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ValidatedModel;
use crate::report::{delta_name, lst_alpha, pgf_busy, pgf_kept, pgf_stationary, ReportRow};

/// What happens to the MMAP phase when the environment jumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseSemantics {
    /// The phase continues.
    #[default]
    Keep,
    /// A fresh phase is drawn from the stationary law of the new state.
    Reset,
}

impl std::str::FromStr for PhaseSemantics {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "keep" => Ok(PhaseSemantics::Keep),
            "reset" => Ok(PhaseSemantics::Reset),
            other => Err(format!("unknown phase semantics `{other}` (keep or reset)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub horizon: f64,
    pub replications: usize,
    pub seed: u64,
    pub phase: PhaseSemantics,
    /// Per-replication limit on processed events.
    pub event_cap: u64,
    /// Time averages are taken over `[window_fraction * T, T]`.
    pub window_fraction: f64,
    pub z_points: Vec<f64>,
    pub s_points: Vec<f64>,
    /// Retention probability per type.
    pub thinning: Option<Vec<f64>>,
}

impl SimOptions {
    pub fn new(horizon: f64, replications: usize, seed: u64) -> Self {
        SimOptions {
            horizon,
            replications,
            seed,
            phase: PhaseSemantics::Keep,
            event_cap: 100_000_000,
            window_fraction: 0.5,
            z_points: vec![0.3, 0.6, 0.9],
            s_points: vec![0.5, 1.0],
            thinning: None,
        }
    }

    pub(crate) fn window_start(&self) -> f64 {
        self.window_fraction * self.horizon
    }
}

/// Point estimates with standard errors across replications.
#[derive(Debug, Clone)]
pub struct EstimateSet {
    pub seed: u64,
    pub replications: usize,
    pub horizon: f64,
    pub rows: Vec<ReportRow>,
    pub events: u64,
    pub conservation_checks: u64,
    pub conservation_violations: u64,
    pub catastrophes: u64,
    /// Histogram of the total busy count at the horizon.
    pub terminal_histogram: Vec<u64>,
}

impl EstimateSet {
    pub fn get(&self, quantity: &str, type_index: Option<usize>) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.quantity == quantity && r.type_index == type_index && r.env_state.is_none())
    }
}

fn mean_se(xs: impl Iterator<Item = f64>) -> (f64, Option<f64>) {
    let xs: Vec<f64> = xs.collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

/// `sum a / sum b` with the delta-method standard error.
fn ratio_se(a: &[f64], b: &[f64]) -> (f64, Option<f64>) {
    let n = a.len() as f64;
    let bbar = b.iter().sum::<f64>() / n;
    let est = a.iter().sum::<f64>() / b.iter().sum::<f64>();
    if a.len() < 2 {
        return (est, None);
    }
    let var = a.iter().zip(b).map(|(x, y)| (x - est * y).powi(2)).sum::<f64>() / (n - 1.0);
    (est, Some((var / n).sqrt() / bbar))
}

fn row(quantity: String, type_index: Option<usize>, t: Option<f64>, (value, stderr): (f64, Option<f64>)) -> ReportRow {
    let mut r = ReportRow::new(quantity, type_index, t, value, "simulation");
    r.stderr = stderr;
    r
}

/// Runs every replication and returns their raw records.
pub fn simulate_records(model: &ValidatedModel, opts: &SimOptions) -> Result<Vec<RunRecord>> {
    if opts.replications == 0 {
        return Err(Error::Domain("at least one replication is required".into()));
    }
    if !(opts.horizon >= 0.0 && opts.horizon.is_finite()) {
        return Err(Error::Domain(format!("horizon {} must be finite and nonnegative", opts.horizon)));
    }
    if let Some(p) = &opts.thinning {
        if p.len() != model.types() || p.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Domain("thinning needs one probability in [0, 1] per type".into()));
        }
    }
    for i in 0..model.state_count() {
        model.phase_stationary(i)?;
    }
    let tables = engine::Tables::new(model);
    (0..opts.replications)
        .into_par_iter()
        .map(|n| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(2 * n as u64);
            let mut thin = ChaCha8Rng::seed_from_u64(opts.seed);
            thin.set_stream(2 * n as u64 + 1);
            engine::run_path(model, &tables, opts, rng, thin)
        })
        .collect()
}

pub fn simulate(model: &ValidatedModel, opts: &SimOptions) -> Result<EstimateSet> {
    let recs = simulate_records(model, opts)?;
    Ok(estimate(model, opts, &recs))
}

/// Turns replication records into estimate rows.
pub fn estimate(model: &ValidatedModel, opts: &SimOptions, recs: &[RunRecord]) -> EstimateSet {
    let k = model.types();
    let comps = model.components();
    let t = opts.horizon;
    let at_t = Some(t);
    let mut rows = Vec::new();
    let total_busy = |r: &RunRecord| r.terminal_busy.iter().sum::<u64>();

    for ty in 0..k {
        rows.push(row("omega".into(), Some(ty), at_t, mean_se(recs.iter().map(|r| r.terminal_busy[ty] as f64))));
    }
    rows.push(row("omega".into(), None, at_t, mean_se(recs.iter().map(|r| total_busy(r) as f64))));
    for &z in &opts.z_points {
        rows.push(row(pgf_busy(z), None, at_t, mean_se(recs.iter().map(|r| z.powi(total_busy(r) as i32)))));
    }
    for &s in &opts.s_points {
        let lst = |r: &RunRecord| (-s * r.terminal_alpha.iter().sum::<f64>()).exp();
        rows.push(row(lst_alpha(s), None, at_t, mean_se(recs.iter().map(lst))));
    }
    if let Some(_) = &opts.thinning {
        for &z in &opts.z_points {
            let kept = |r: &RunRecord| z.powi(r.kept.iter().sum::<u64>() as i32);
            rows.push(row(pgf_kept(z), None, at_t, mean_se(recs.iter().map(kept))));
        }
    }

    let width = t - opts.window_start();
    if width > 0.0 {
        for ty in 0..k {
            rows.push(row("L_q".into(), Some(ty), None, mean_se(recs.iter().map(|r| r.area_busy[ty] / width))));
        }
        rows.push(row("L_q".into(), None, None, mean_se(recs.iter().map(|r| r.area_busy.iter().sum::<f64>() / width))));
        for c in 0..comps {
            for ty in 0..k {
                rows.push(row(delta_name(c), Some(ty), None, mean_se(recs.iter().map(|r| r.area_alpha[ty][c] / width))));
            }
            let all = |r: &RunRecord| r.area_alpha.iter().map(|a| a[c]).sum::<f64>() / width;
            rows.push(row(delta_name(c), None, None, mean_se(recs.iter().map(all))));
        }
        for (n, &z) in opts.z_points.iter().enumerate() {
            rows.push(row(pgf_stationary(z), None, None, mean_se(recs.iter().map(|r| r.area_pgf[n] / width))));
        }
        if !model.environment().is_static() {
            let cats: Vec<f64> = recs.iter().map(|r| r.catastrophes_window as f64).collect();
            let per_type = |ty: Option<usize>| -> Vec<f64> {
                recs.iter()
                    .map(|r| match ty {
                        Some(q) => r.destroyed_window[q] as f64,
                        None => r.destroyed_window.iter().sum::<u64>() as f64,
                    })
                    .collect()
            };
            for ty in (0..k).map(Some).chain([None]) {
                let destroyed = per_type(ty);
                if cats.iter().any(|&c| c > 0.0) {
                    rows.push(row("L_los".into(), ty, None, ratio_se(&destroyed, &cats)));
                }
                rows.push(row("L_los_rate".into(), ty, None, mean_se(destroyed.iter().map(|d| d / width))));
            }
        }
    }

    let max_busy = recs.iter().map(total_busy).max().unwrap_or(0) as usize;
    let mut terminal_histogram = vec![0; max_busy + 1];
    for r in recs {
        terminal_histogram[total_busy(r) as usize] += 1;
    }
    EstimateSet {
        seed: opts.seed,
        replications: recs.len(),
        horizon: t,
        rows,
        events: recs.iter().map(|r| r.events).sum(),
        conservation_checks: recs.iter().map(|r| r.conservation_checks).sum(),
        conservation_violations: recs.iter().map(|r| r.conservation_violations).sum(),
        catastrophes: recs.iter().map(|r| r.catastrophes).sum(),
        terminal_histogram,
    }
}
