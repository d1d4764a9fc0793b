//! Acceptance suite: one verdict line per criterion.

mod common;

use std::time::Instant;

use num_complex::Complex64;

use common::{fixture, fixture_path, verdict};
use mmapq::analysis::Analyzer;
use mmapq::distribution::DistributionSpec;
use mmapq::grid::Grid;
use mmapq::map_algebra::{counting_moments, counting_pgf, stationary_phase, thinned_counting_pgf};
use mmapq::measures::{default_n_max, pgf_to_pmf, stationary_kpis};
use mmapq::model::*;
use mmapq::renewal::renewal_matrix;
use mmapq::report::{analytic_rows, pgf_kept, AnalyticRequest, ReportRow};
use mmapq::simulator::{compare, simulate, EstimateSet, SimOptions};
use mmapq::special_case::{mgi_kpis, mgi_special_case};
use mmapq::transient::{transient_path, Method, TransformPoint};

/// Root seed of every simulation in this suite (the command-line default).
const SEED: u64 = 1;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn scalar(theta: &[f64], m: &mmapq::linalg::CMatrix) -> Complex64 {
    let mut acc = c(0.0, 0.0);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            acc += theta[i] * m[(i, j)];
        }
    }
    acc
}

/// Keeps only the estimate rows whose quantity satisfies `keep`.
fn restrict(est: &EstimateSet, keep: impl Fn(&ReportRow) -> bool) -> EstimateSet {
    let mut out = est.clone();
    out.rows.retain(|r| keep(r));
    out
}

#[test]
fn criterion_01_counting_process() {
    let start = Instant::now();
    let m = fixture("map2.toml");
    let state = m.mmap(0);
    let pi: Vec<f64> = stationary_phase(state).unwrap().iter().copied().collect();
    let mut worst_row = 0.0f64;
    let mut worst_semigroup = 0.0f64;
    let mut worst_moment = 0.0f64;
    let z = [c(0.4, 0.3)];
    let pgf = |x: f64, t: f64| scalar(&pi, &counting_pgf(state, &[c(x, 0.0)], t).unwrap()).re;
    for t in [0.5, 2.0, 10.0] {
        let p1 = counting_pgf(state, &[c(1.0, 0.0)], t).unwrap();
        for i in 0..2 {
            worst_row = worst_row.max((p1.row(i).sum() - c(1.0, 0.0)).norm());
        }
        let whole = counting_pgf(state, &z, t + 0.7).unwrap();
        let split = counting_pgf(state, &z, t).unwrap() * counting_pgf(state, &z, 0.7).unwrap();
        worst_semigroup = worst_semigroup.max((whole - split).norm());

        // one-sided fourth-order differences at z = 1
        let h = 1e-3;
        let f: Vec<f64> = (0..6).map(|k| pgf(1.0 - k as f64 * h, t)).collect();
        let d1 = (25.0 * f[0] - 48.0 * f[1] + 36.0 * f[2] - 16.0 * f[3] + 3.0 * f[4]) / (12.0 * h);
        let d2 = (45.0 * f[0] - 154.0 * f[1] + 214.0 * f[2] - 156.0 * f[3] + 61.0 * f[4] - 10.0 * f[5]) / (12.0 * h * h);
        let fd_var = d2 + d1 - d1 * d1;
        let mo = counting_moments(state, &[1], t, &pi).unwrap();
        worst_moment = worst_moment.max(((mo.mean - d1) / d1).abs()).max(((mo.variance - fd_var) / fd_var).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst_row < 1e-12 && worst_semigroup < 1e-10 && worst_moment < 1e-4 && secs < 1.0;
    verdict(
        1,
        pass,
        &format!("row-sum err {worst_row:.1e}, semigroup err {worst_semigroup:.1e}, moment rel err {worst_moment:.1e}, {secs:.2}s"),
    );
    assert!(pass);
}

/// `E[min(B, t)]` from the survival function of each family.
fn expected_min(law: &DistributionSpec, t: f64) -> f64 {
    match law {
        DistributionSpec::Exponential { rate } => (1.0 - (-rate * t).exp()) / rate,
        DistributionSpec::Erlang { shape, rate } => {
            // int_0^t e^{-mu u} (mu u)^j / j! du = (1 - sum_{i <= j} e^{-mu t} (mu t)^i / i!) / mu
            let x = rate * t;
            let mut total = 0.0;
            for j in 0..(*shape as usize) {
                let mut poisson_cdf = 0.0;
                let mut term = (-x).exp();
                for i in 0..=j {
                    if i > 0 {
                        term *= x / i as f64;
                    }
                    poisson_cdf += term;
                }
                total += (1.0 - poisson_cdf) / rate;
            }
            total
        }
        DistributionSpec::Deterministic { value } => value.min(t),
        _ => unreachable!(),
    }
}

fn poisson_model(lambda: f64, service: DistributionSpec, horizon: f64, step: f64) -> ValidatedModel {
    let cfg = ModelConfig {
        initial_customers: vec![0],
        service: vec![vec![service]],
        mmap: MmapSpec {
            phases: 1,
            types: 1,
            states: vec![MmapBlockSpec {
                d0: vec![vec![-lambda]],
                batches: vec![BatchSpec { label: vec![1], matrix: vec![vec![lambda]] }],
            }],
        },
        environment: EnvironmentSpec { states: 1, initial: vec![1.0], kernel: vec![] },
        resources: ResourceSpec {
            arrival: vec![vec![DistributionSpec::exponential(1.0)]],
            departure: vec![vec![DistributionSpec::exponential(1.0)]],
        },
        numeric: NumericSpec::new(horizon, step),
    };
    validate_model(&cfg).unwrap()
}

#[test]
fn criterion_02_mg_inf_closed_form() {
    let start = Instant::now();
    let lambda = 1.5;
    let points = [
        (c(0.0, 0.0), 0.4),
        (c(0.25, 0.0), 0.8),
        (c(0.5, 0.0), 1.2),
        (c(0.75, 0.0), 1.6),
        (c(0.9, 0.0), 2.0),
        (c(0.3, 0.4), 0.5),
        (c(-0.5, 0.0), 1.0),
        (c(0.0, 0.6), 1.5),
        (c(0.95, 0.0), 0.2),
        (c(0.1, -0.2), 1.9),
    ];
    let laws = [DistributionSpec::exponential(1.2), DistributionSpec::erlang(3, 2.0), DistributionSpec::deterministic(0.8)];
    let mut worst = 0.0f64;
    for law in &laws {
        let m = poisson_model(lambda, law.clone(), 2.0, 1e-4);
        for &(z, t) in &points {
            let pt = TransformPoint::busy(vec![z], vec![0.0]);
            let grid = Grid::new(t, 1e-4).unwrap();
            let got = transient_path(&m, 0, &pt, &grid, Method::Ode).unwrap().last()[(0, 0)];
            let want = (lambda * (z - 1.0) * expected_min(law, t)).exp();
            worst = worst.max((got - want).norm());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst < 1e-8 && secs < 1.0;
    verdict(2, pass, &format!("max |error| {worst:.1e} over 3 laws x 10 (z, t) points at step 1e-4, {secs:.2}s"));
    assert!(pass);
}

#[test]
fn criterion_03_ode_versus_closed_form() {
    let start = Instant::now();
    // one phase: the two methods through the whole catastrophe pipeline
    let m1 = fixture("mm_inf_catastrophe.toml");
    let ode = Analyzer::new(&m1, Method::Ode).unwrap();
    let cf = Analyzer::new(&m1, Method::ClosedForm).unwrap();
    let mut gap1 = 0.0f64;
    for z in [c(0.3, 0.0), c(0.6, 0.0), c(0.9, 0.0), c(0.5, 0.5)] {
        let pt = TransformPoint::busy(vec![z], vec![0.5]);
        let a = ode.transient(&pt).unwrap();
        let b = cf.transient(&pt).unwrap();
        for (x, y) in a.mixed.iter().zip(&b.mixed) {
            gap1 = gap1.max((x - y).norm());
        }
        gap1 = gap1.max((ode.stationary(&pt).unwrap() - cf.stationary(&pt).unwrap()).norm());
    }

    // two phases: ODE against simulation, closed-form gap measured
    let m2 = fixture("map2.toml");
    let horizon = m2.grid().horizon();
    let ode2 = Analyzer::new(&m2, Method::Ode).unwrap();
    let cf2 = Analyzer::new(&m2, Method::ClosedForm).unwrap();
    let request = AnalyticRequest { with_pmf: false, ..Default::default() };
    let rows = analytic_rows(&ode2, &request).unwrap();
    let cf_rows = analytic_rows(&cf2, &request).unwrap();
    let est = simulate(&m2, &SimOptions::new(horizon, 10_000, SEED)).unwrap();
    let transient = restrict(&est, |r| r.t.is_some());
    let ode_cmp = compare(&transient, &rows, 3.0).unwrap();
    let cf_cmp = compare(&transient, &cf_rows, 3.0).unwrap();
    let mut gap2 = 0.0f64;
    for (a, b) in ode_cmp.items.iter().zip(&cf_cmp.items) {
        gap2 = gap2.max((a.analytic - b.analytic).abs());
    }
    let worst_z = ode_cmp.items.iter().map(|i| i.z.abs()).fold(0.0, f64::max);
    let worst_z_cf = cf_cmp.items.iter().map(|i| i.z.abs()).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    let pass = gap1 < 1e-8 && ode_cmp.all_pass() && secs < 120.0;
    verdict(
        3,
        pass,
        &format!(
            "m=1 max gap {gap1:.1e}; m=2 ODE max |z| {worst_z:.2} over {} estimates (R=1e4); \
             m=2 closed-form gap {gap2:.2e} (its max |z| {worst_z_cf:.2}); {secs:.1}s",
            ode_cmp.items.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_04_catastrophe_closed_form() {
    let start = Instant::now();
    let m = fixture("mm_inf_catastrophe.toml");
    let kpis = stationary_kpis(&m).unwrap();
    let target = 4.0 / 3.0;
    let analytic_ok = (kpis.l_q_total() - target).abs() < 5e-5 && (kpis.l_los_total() - target).abs() < 5e-5;

    let a = Analyzer::new(&m, Method::Ode).unwrap();
    let mut route_gap = 0.0f64;
    for z in [c(0.0, 0.0), c(0.3, 0.0), c(0.6, 0.0), c(0.9, 0.0), c(0.2, 0.5)] {
        let pt = TransformPoint::busy(vec![z], vec![0.3]);
        route_gap = route_gap.max((a.stationary(&pt).unwrap() - a.stationary_exponential(&pt).unwrap()).norm());
    }

    let est = simulate(&m, &SimOptions::new(m.grid().horizon(), 10_000, SEED)).unwrap();
    let mut analytic = Vec::new();
    for (name, v) in [("L_q", kpis.l_q_total()), ("L_los", kpis.l_los_total()), ("L_los_rate", kpis.l_los_rate_total())] {
        analytic.push(ReportRow::new(name, None, None, v, "integral"));
    }
    let picked = restrict(&est, |r| r.type_index.is_none() && ["L_q", "L_los", "L_los_rate"].contains(&r.quantity.as_str()));
    let cmp = compare(&picked, &analytic, 3.0).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let zs: Vec<String> = cmp.items.iter().map(|i| format!("{} z={:.2}", i.key.quantity, i.z)).collect();
    let pass = analytic_ok && route_gap < 1e-6 && cmp.items.len() == 3 && cmp.all_pass() && secs < 120.0;
    verdict(
        4,
        pass,
        &format!(
            "L_q {:.6}, L_los {:.6} (per catastrophe), L_los_rate {:.6}; stationary routes gap {route_gap:.1e}; sim {}; {secs:.1}s",
            kpis.l_q_total(),
            kpis.l_los_total(),
            kpis.l_los_rate_total(),
            zs.join(", ")
        ),
    );
    assert!(pass);
}

fn exp_environment(v: f64) -> Environment {
    Environment::from_spec(&EnvironmentSpec {
        states: 1,
        initial: vec![1.0],
        kernel: vec![KernelEntry { from: 0, to: 0, prob: 1.0, dist: DistributionSpec::exponential(v) }],
    })
    .unwrap()
}

#[test]
fn criterion_05_renewal_solver() {
    let env = exp_environment(2.0);
    let h_at = |step: f64| renewal_matrix(&env, &Grid::new(5.0, step).unwrap()).unwrap().at(5.0).unwrap()[(0, 0)];
    let h = h_at(0.01);
    let e = [0.04, 0.02, 0.01].map(|s| (h_at(s) - 10.0).abs());
    let orders = [(e[0] / e[1]).log2(), (e[1] / e[2]).log2()];
    let value_ok = (h - 10.0).abs() / 10.0 < 0.02;
    let order_ok = orders.iter().all(|p| (p - 2.0).abs() < 0.2);

    let det = Environment::from_spec(&EnvironmentSpec {
        states: 1,
        initial: vec![1.0],
        kernel: vec![KernelEntry { from: 0, to: 0, prob: 1.0, dist: DistributionSpec::deterministic(1.0) }],
    })
    .unwrap();
    let sol = renewal_matrix(&det, &Grid::new(5.0, 0.01).unwrap()).unwrap();
    let mut det_err = 0.0f64;
    for t in [0.5, 1.25, 2.5, 3.7, 4.99] {
        det_err = det_err.max((sol.at(t).unwrap()[(0, 0)] - (t as f64).floor()).abs());
    }
    let pass = value_ok && order_ok && det_err < 1e-12;
    verdict(
        5,
        pass,
        &format!(
            "H(5) = {h:.5} (exp(2), step 0.01); observed orders {:.2}, {:.2}; deterministic max err {det_err:.1e}",
            orders[0], orders[1]
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_pgf_inversion() {
    let poisson = pgf_to_pmf(|z| Ok((z - 1.0).exp()), 20).unwrap();
    let mut fact = 1.0;
    let mut worst = 0.0f64;
    for n in 0..=10 {
        if n > 0 {
            fact *= n as f64;
        }
        worst = worst.max((poisson.probs[n] - (-1.0f64).exp() / fact).abs());
    }

    let m = fixture("mm_inf_catastrophe.toml");
    let a = Analyzer::new(&m, Method::Ode).unwrap();
    let l_q = stationary_kpis(&m).unwrap().l_q_total();
    let pmf = pgf_to_pmf(|z| a.stationary_pgf(z), default_n_max(l_q)).unwrap();
    let sum: f64 = pmf.probs.iter().sum();
    let rel = (pmf.mean() - l_q).abs() / l_q;
    let pass = worst < 1e-10 && (sum - 1.0).abs() < 1e-6 && rel < 1e-4;
    verdict(
        6,
        pass,
        &format!(
            "Poisson(1) max err {worst:.1e}; catastrophe PMF sum {sum:.9} over n <= {}, mean rel err vs L_q {rel:.1e}",
            pmf.probs.len() - 1
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_thinning() {
    let m = fixture("map2.toml");
    let horizon = m.grid().horizon();
    let state = m.mmap(0);
    let pi: Vec<f64> = stationary_phase(state).unwrap().iter().copied().collect();
    let mut all = true;
    let mut parts = Vec::new();
    for p in [0.25, 0.75] {
        let mut opts = SimOptions::new(horizon, 10_000, SEED);
        opts.thinning = Some(vec![p]);
        let est = simulate(&m, &opts).unwrap();
        let kept = restrict(&est, |r| r.quantity.starts_with("pgf_kept"));
        let analytic: Vec<ReportRow> = opts
            .z_points
            .iter()
            .map(|&z| {
                let mat = thinned_counting_pgf(state, &[c(z, 0.0)], &|_| vec![p], m.grid(), horizon).unwrap();
                ReportRow::new(pgf_kept(z), None, Some(horizon), scalar(&pi, &mat).re, "ode")
            })
            .collect();
        let cmp = compare(&kept, &analytic, 3.0).unwrap();
        all &= cmp.items.len() == 3 && cmp.all_pass();
        let zs: Vec<String> = cmp.items.iter().map(|i| format!("{:.2}", i.z)).collect();
        parts.push(format!("p={p}: z [{}]", zs.join(", ")));
    }
    verdict(7, all, &format!("{} (z in 0.3, 0.6, 0.9; R=1e4)", parts.join("; ")));
    assert!(all);
}

/// Two types, batch-Poisson in both environment states:
/// `p((1,0)) = 0.6`, `p((0,2)) = 0.4`, rates 1.5 and 2.5.
fn batch_poisson_model() -> ValidatedModel {
    let mut cfg = common::fixture_config("two_type_sm.toml");
    cfg.mmap.phases = 1;
    cfg.mmap.states = [1.5, 2.5]
        .iter()
        .map(|&alpha| MmapBlockSpec {
            d0: vec![vec![-alpha]],
            batches: vec![
                BatchSpec { label: vec![1, 0], matrix: vec![vec![0.6 * alpha]] },
                BatchSpec { label: vec![0, 2], matrix: vec![vec![0.4 * alpha]] },
            ],
        })
        .collect();
    cfg.numeric = NumericSpec::new(10.0, 0.01);
    validate_model(&cfg).unwrap()
}

#[test]
fn criterion_08_pipeline_equality() {
    let m = batch_poisson_model();
    let points = [
        TransformPoint::busy(vec![c(0.3, 0.0), c(0.7, 0.0)], vec![0.0, 0.0]),
        TransformPoint::busy(vec![c(0.5, 0.2), c(-0.4, 0.1)], vec![0.5, 1.0]),
        TransformPoint::served(vec![c(0.6, 0.0), c(0.2, 0.0)], vec![0.3, 0.0]),
        TransformPoint {
            z1: vec![c(0.8, 0.0), c(0.4, 0.0)],
            z2: vec![c(0.5, 0.0), c(0.9, 0.0)],
            s1: vec![0.2, 0.1],
            s2: vec![0.4, 0.7],
        },
    ];
    let mut gaps = [0.0f64; 2];
    for (slot, method) in [Method::ClosedForm, Method::Ode].into_iter().enumerate() {
        let a = Analyzer::new(&m, method).unwrap();
        for pt in &points {
            let special = mgi_special_case(&m, pt).unwrap();
            let generic = a.transient(pt).unwrap();
            for (x, y) in special.mixed.iter().zip(&generic.mixed) {
                gaps[slot] = gaps[slot].max((x - y).norm());
            }
            gaps[slot] = gaps[slot].max((special.stationary - a.stationary(pt).unwrap()).norm());
        }
    }
    let k1 = mgi_kpis(&m).unwrap();
    let k2 = stationary_kpis(&m).unwrap();
    let mut kpi_gap = 0.0f64;
    for r in 0..2 {
        kpi_gap = kpi_gap.max((k1.l_los[r] - k2.l_los[r]).abs()).max((k1.l_q[r] - k2.l_q[r]).abs());
    }
    let pass = gaps[0] < 1e-8 && gaps[1] < 1e-8 && kpi_gap < 1e-8;
    verdict(
        8,
        pass,
        &format!(
            "max gap vs closed-form pipeline {:.1e}, vs ODE pipeline {:.1e}, L_q/L_los gap {kpi_gap:.1e}",
            gaps[0], gaps[1]
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_conservation() {
    let m = fixture("two_type_sm.toml");
    let est = simulate(&m, &SimOptions::new(m.grid().horizon(), 5_000, SEED)).unwrap();
    let pass = est.events >= 1_000_000 && est.conservation_checks == est.events && est.conservation_violations == 0;
    verdict(
        9,
        pass,
        &format!(
            "{} events, {} checks, {} violations, {} catastrophes",
            est.events, est.conservation_checks, est.conservation_violations, est.catastrophes
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_end_to_end_compare() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("compare.csv");
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_mmapq"))
        .args(["compare", "--model"])
        .arg(fixture_path("two_type_sm.toml"))
        .args(["--reps", "20000", "--seed", &SEED.to_string(), "--z-threshold", "3", "--output"])
        .arg(&out)
        .status()
        .unwrap();
    let table = std::fs::read_to_string(&out).unwrap_or_default();
    let scored = table.lines().count().saturating_sub(1);
    let failed = table.lines().filter(|l| l.ends_with("FAIL")).count();
    let secs = start.elapsed().as_secs_f64();
    let pass = status.code() == Some(0) && scored > 0 && failed == 0 && secs < 300.0;
    verdict(10, pass, &format!("exit {:?}, {scored} scored quantities, {failed} failing, {secs:.1}s", status.code()));
    assert!(pass);
}
