//! Distributions and scalar performance measures extracted from the transforms.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::analysis::Analyzer;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::map_algebra::arrival_rates_with;
use crate::model::ValidatedModel;
use crate::renewal::{stationary_grid, stationary_weights, KernelIncrements};

const NORMALIZATION_TOLERANCE: f64 = 1e-6;
const CLIP_TOLERANCE: f64 = 1e-9;

/// Truncated probability mass function with the mass beyond `N_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    pub probs: Vec<f64>,
    pub tail: f64,
}

impl Pmf {
    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }
}

/// `ceil(mean + 10 sqrt(mean))`, at least one.
pub fn default_n_max(mean: f64) -> usize {
    (mean.max(0.0) + 10.0 * mean.max(0.0).sqrt()).ceil().max(1.0) as usize
}

/// Inverts a PGF by the discrete Fourier transform of its values at `M`
/// equally spaced points of the unit circle, `M` the first power of two with
/// `M >= 2 (N_max + 1)`. Round-off negatives down to `-1e-9` are set to zero.
pub fn pgf_to_pmf<F>(pgf: F, n_max: usize) -> Result<Pmf>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let at_one = pgf(Complex64::new(1.0, 0.0))?;
    if (at_one - 1.0).norm() > NORMALIZATION_TOLERANCE {
        return Err(Error::NotNormalized(at_one.re));
    }
    let m = (2 * (n_max + 1)).next_power_of_two();
    let mut samples = (0..m)
        .into_par_iter()
        .map(|j| pgf(Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / m as f64)))
        .collect::<Result<Vec<Complex64>>>()?;
    FftPlanner::new().plan_fft_forward(m).process(&mut samples);
    let probs: Vec<f64> = samples[..=n_max]
        .iter()
        .map(|c| {
            let p = c.re / m as f64;
            if (-CLIP_TOLERANCE..0.0).contains(&p) {
                0.0
            } else {
                p
            }
        })
        .collect();
    let tail = 1.0 - probs.iter().sum::<f64>();
    Ok(Pmf { probs, tail })
}

/// Stationary means from the closed double integrals, per type `r`:
///
/// * `L_q,r = sum_j w_j lambda_jr int (1 - F_j(u)) int_0^u (1 - B_jr(x)) dx du`
/// * `delta_r,c = c_rc * L_q,r` in mean resource units
/// * `L_los_rate,r = sum_j w_j lambda_jr int int_0^u (1 - B_jr(x)) dx dF_j(u)`,
///   customers destroyed per unit time
/// * `L_los,r = sum_j rho_j lambda_jr int int_0^u (1 - B_jr(x)) dx dF_j(u)`,
///   mean customers destroyed at one catastrophe epoch
///
/// with `w_j = q_j / eta_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryKpis {
    pub l_q: Vec<f64>,
    pub l_los: Vec<f64>,
    pub l_los_rate: Vec<f64>,
    /// `delta[r][c]`.
    pub delta: Vec<Vec<f64>>,
    /// Neglected sojourn mass beyond the truncation point.
    pub tail_bound: f64,
}

impl StationaryKpis {
    pub fn l_q_total(&self) -> f64 {
        self.l_q.iter().sum()
    }

    pub fn l_los_total(&self) -> f64 {
        self.l_los.iter().sum()
    }

    pub fn l_los_rate_total(&self) -> f64 {
        self.l_los_rate.iter().sum()
    }

    pub fn delta_total(&self) -> Vec<f64> {
        let k = self.delta.first().map_or(0, |v| v.len());
        (0..k).map(|c| self.delta.iter().map(|v| v[c]).sum()).collect()
    }
}

/// Per-state type rates `lambda_jr`, computed with the stationary phase law of `D(j)`.
pub fn state_type_rates(model: &ValidatedModel) -> Result<Vec<Vec<f64>>> {
    (0..model.state_count())
        .map(|j| Ok(arrival_rates_with(model.mmap(j), model.phase_stationary(j)?).per_type))
        .collect()
}

pub fn stationary_kpis(model: &ValidatedModel) -> Result<StationaryKpis> {
    let rates = state_type_rates(model)?;
    stationary_kpis_with_rates(model, &rates)
}

pub(crate) fn stationary_kpis_with_rates(model: &ValidatedModel, rates: &[Vec<f64>]) -> Result<StationaryKpis> {
    let k = model.types();
    let res = model.resources();
    let comps = model.components();
    let env = model.environment();
    let delta_of = |l_q: &[f64]| -> Vec<Vec<f64>> {
        (0..k).map(|r| (0..comps).map(|c| res.arrival_mean(r, c) * l_q[r]).collect()).collect()
    };
    if env.is_static() {
        let l_q: Vec<f64> = (0..k).map(|r| rates[0][r] * res.service_law(r, 0).mean()).collect();
        return Ok(StationaryKpis {
            delta: delta_of(&l_q),
            l_los: vec![0.0; k],
            l_los_rate: vec![0.0; k],
            l_q,
            tail_bound: 0.0,
        });
    }
    let weights = stationary_weights(env)?;
    let grid: Grid = stationary_grid(env, model.grid().step(), model.tail_tolerance(), model.max_stationary_horizon())?;
    let inc = KernelIncrements::new(env, &grid)?;
    let h = grid.step();
    let n = grid.steps();
    let s = model.state_count();

    let eta_num: Vec<f64> = (0..s)
        .map(|j| (1..=n).map(|k| 0.5 * h * (inc.survival(j, k - 1) + inc.survival_left(j, k))).sum())
        .collect();
    let norm: f64 = (0..s).map(|j| weights.rho[j] * eta_num[j]).sum();

    let mut l_q = vec![0.0; k];
    let mut l_los = vec![0.0; k];
    let mut l_los_rate = vec![0.0; k];
    let mut tail_bound = 0.0;
    for j in 0..s {
        let w = weights.rho[j] / norm;
        tail_bound += w * (weights.eta[j] - eta_num[j]).abs();
        for r in 0..k {
            let law = res.service_law(r, j);
            let inner: Vec<f64> = (0..=n).map(|kk| law.integrated_survival(grid.time(kk))).collect();
            let mut against_survival = 0.0;
            let mut against_df = 0.0;
            for kk in 1..=n {
                against_survival += 0.5 * h * (inc.survival(j, kk - 1) * inner[kk - 1] + inc.survival_left(j, kk) * inner[kk]);
                let continuous = inc.survival(j, kk - 1) - inc.survival_left(j, kk);
                let atom = inc.survival_left(j, kk) - inc.survival(j, kk);
                against_df += 0.5 * continuous * (inner[kk - 1] + inner[kk]) + atom * inner[kk];
            }
            l_q[r] += w * rates[j][r] * against_survival;
            l_los_rate[r] += w * rates[j][r] * against_df;
            l_los[r] += weights.rho[j] * rates[j][r] * against_df;
        }
    }
    Ok(StationaryKpis { delta: delta_of(&l_q), l_q, l_los, l_los_rate, tail_bound })
}

/// Every analytic output for one model.
#[derive(Debug, Clone)]
pub struct PerformanceReport {
    pub grid: Grid,
    /// `omega[r][k]`: transient mean busy servers of type `r` at node `k`.
    pub omega: Vec<Vec<f64>>,
    pub kpis: StationaryKpis,
    pub pmf: Option<Pmf>,
}

impl PerformanceReport {
    pub fn omega_total(&self) -> Vec<f64> {
        let n = self.grid.steps() + 1;
        (0..n).map(|k| self.omega.iter().map(|w| w[k]).sum()).collect()
    }

    /// `delta_r,c(t_k) = c_rc * omega_r(t_k)`.
    pub fn delta_transient(&self, model: &ValidatedModel, r: usize, c: usize) -> Vec<f64> {
        let mean = model.resources().arrival_mean(r, c);
        self.omega[r].iter().map(|w| mean * w).collect()
    }
}

pub fn performance_report(analyzer: &Analyzer<'_>, with_pmf: bool) -> Result<PerformanceReport> {
    let model = analyzer.model();
    let omega = (0..model.types())
        .map(|r| analyzer.transient_means(Some(r)))
        .collect::<Result<Vec<_>>>()?;
    let kpis = stationary_kpis(model)?;
    let pmf = if with_pmf {
        let n_max = default_n_max(kpis.l_q_total());
        Some(pgf_to_pmf(|z| analyzer.stationary_pgf(z), n_max)?)
    } else {
        None
    };
    Ok(PerformanceReport { grid: *model.grid(), omega, kpis, pmf })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{exp_env, poisson_model, static_env};
    use crate::model::{validate_model, NumericSpec};
    use crate::transient::Method;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn monomial_pgf() {
        let pmf = pgf_to_pmf(|z| Ok(z * z * z), 5).unwrap();
        for (n, p) in pmf.probs.iter().enumerate() {
            let want = if n == 3 { 1.0 } else { 0.0 };
            assert!((p - want).abs() < 1e-14);
        }
        let one = pgf_to_pmf(|_| Ok(c(1.0)), 3).unwrap();
        assert!((one.probs[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn poisson_pmf() {
        let pmf = pgf_to_pmf(|z| Ok((z - 1.0).exp()), 20).unwrap();
        let e = (-1.0f64).exp();
        assert!((pmf.probs[0] - e).abs() < 1e-14);
        assert!((pmf.probs[1] - e).abs() < 1e-14);
        assert!((pmf.probs[2] - e / 2.0).abs() < 1e-14);
        assert!(pmf.tail.abs() < 1e-12);
    }

    #[test]
    fn unnormalized_pgf_rejected() {
        assert!(matches!(pgf_to_pmf(|z| Ok(z * 0.5), 4), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn catastrophe_kpis_closed_form() {
        let mut cfg = poisson_model(2.0, 1.0, exp_env(0.5));
        cfg.numeric = NumericSpec::new(1.0, 0.001);
        let m = validate_model(&cfg).unwrap();
        let k = stationary_kpis(&m).unwrap();
        assert!((k.l_q_total() - 4.0 / 3.0).abs() < 1e-6, "{}", k.l_q_total());
        assert!((k.l_los_total() - 4.0 / 3.0).abs() < 1e-6, "{}", k.l_los_total());
        assert!((k.l_los_rate_total() - 2.0 / 3.0).abs() < 1e-6);
        // exponential(1) resource has mean one
        assert!((k.delta_total()[0] - k.l_q_total()).abs() < 1e-15);
    }

    #[test]
    fn static_kpis() {
        let m = validate_model(&poisson_model(1.0, 1.0, static_env())).unwrap();
        let k = stationary_kpis(&m).unwrap();
        assert_eq!(k.l_q_total(), 1.0);
        assert_eq!(k.l_los_total(), 0.0);
    }

    #[test]
    fn report_pmf_mean_matches_l_q() {
        let mut cfg = poisson_model(2.0, 1.0, exp_env(0.5));
        cfg.numeric = NumericSpec::new(1.0, 0.01);
        let m = validate_model(&cfg).unwrap();
        let a = Analyzer::new(&m, Method::Ode).unwrap();
        let rep = performance_report(&a, true).unwrap();
        let pmf = rep.pmf.unwrap();
        assert!(pmf.probs.iter().all(|&p| p >= 0.0));
        assert!((pmf.probs.iter().sum::<f64>() + pmf.tail - 1.0).abs() < 1e-6);
        assert!(pmf.tail.abs() < 1e-6);
        assert!((pmf.mean() - rep.kpis.l_q_total()).abs() < 1e-4 * rep.kpis.l_q_total());
    }
}
