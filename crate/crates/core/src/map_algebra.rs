//! Generator-level algebra of a marked MAP in one environment state:
//! `D(z)`, the stationary phase law, the counting-process PGF and moments,
//! arrival rates and Bernoulli thinning.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{complexify, deflated_solve, expm, expm_real, stationary_of_generator, CMatrix, RMatrix};
use crate::model::MmapState;

const DOMAIN_SLACK: f64 = 1e-12;

fn check_polydisc(z: &[Complex64]) -> Result<()> {
    for (r, zr) in z.iter().enumerate() {
        if zr.norm() > 1.0 + DOMAIN_SLACK {
            return Err(Error::Domain(format!("|z[{r}]| = {} exceeds 1", zr.norm())));
        }
    }
    Ok(())
}

/// `z^h = prod_r z_r^{h_r}`.
pub fn monomial(z: &[Complex64], h: &[u32]) -> Complex64 {
    z.iter()
        .zip(h)
        .fold(Complex64::new(1.0, 0.0), |acc, (zr, &hr)| acc * zr.powu(hr))
}

fn check_arity(state: &MmapState, z: &[Complex64]) -> Result<()> {
    if z.len() != state.types() {
        return Err(Error::Domain(format!(
            "expected {} PGF arguments, got {}",
            state.types(),
            z.len()
        )));
    }
    Ok(())
}

/// `D0 + sum_h z^h D_h` without the unit-polydisc check; used by the
/// finite-difference derivatives, which step slightly outside the disc.
pub(crate) fn generator_pgf_unchecked(state: &MmapState, z: &[Complex64]) -> CMatrix {
    let mut d = complexify(&state.d0);
    for b in &state.batches {
        let w = monomial(z, &b.label);
        d.zip_apply(&b.matrix, |x, y| *x += w * y);
    }
    d
}

/// `D(z) = D0 + sum_h z^h D_h`.
pub fn generator_pgf(state: &MmapState, z: &[Complex64]) -> Result<CMatrix> {
    check_arity(state, z)?;
    check_polydisc(z)?;
    Ok(generator_pgf_unchecked(state, z))
}

/// Stationary phase law `pi D = 0, pi e = 1`.
pub fn stationary_phase(state: &MmapState) -> Result<DVector<f64>> {
    stationary_of_generator(&state.generator())
}

/// `P(z, t) = exp(D(z) t)`.
pub fn counting_pgf(state: &MmapState, z: &[Complex64], t: f64) -> Result<CMatrix> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be nonnegative, got {t}")));
    }
    let d = generator_pgf(state, z)?;
    Ok(expm(&(d * Complex64::new(t, 0.0))))
}

/// PGF of the number of batches with label index `h` only:
/// `exp((D0 + sum_{h' != h} D_h' + z D_h) t)`.
pub fn batch_counting_pgf(state: &MmapState, h: usize, z: Complex64, t: f64) -> CMatrix {
    let mut d = complexify(&state.generator());
    d.zip_apply(&state.batches[h].matrix, |x, y| *x += (z - 1.0) * y);
    expm(&(d * Complex64::new(t, 0.0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountingMoments {
    pub mean: f64,
    pub variance: f64,
    pub t: f64,
    pub label: Vec<u32>,
    pub theta: Vec<f64>,
}

fn row_dot(a: &DVector<f64>, m: &RMatrix, b: &DVector<f64>) -> f64 {
    (a.transpose() * m * b)[(0, 0)]
}

/// Mean and variance of the number of label-`h` batches in `[0, t)` for
/// initial phase law `theta`:
///
/// `E = lambda_h t + theta (e^{Dt} - I)(D - e pi)^{-1} D_h e`
///
/// `Var = [lambda_h - 2 lambda_h^2 - 2 pi D_h (D - e pi)^{-1} D_h e] t
///        + 2 pi D_h (D - e pi)^{-1} (e^{Dt} - I)(D - e pi)^{-1} D_h e`.
///
/// The variance expression does not involve `theta`; it is exact for `theta = pi`.
pub fn counting_moments(state: &MmapState, label: &[u32], t: f64, theta: &[f64]) -> Result<CountingMoments> {
    let h = state
        .batch_index(label)
        .ok_or_else(|| Error::Domain(format!("no batch with label {label:?}")))?;
    let m = state.phases();
    if theta.len() != m {
        return Err(Error::Domain(format!("theta has {} entries, expected {m}", theta.len())));
    }
    let d = state.generator();
    let pi = stationary_of_generator(&d)?;
    let dh = &state.batches[h].matrix;
    let e = DVector::from_element(m, 1.0);
    let theta_v = DVector::from_column_slice(theta);
    let lambda_h = row_dot(&pi, dh, &e);
    let y = deflated_solve(&d, &pi, &(dh * &e))?;
    let exp_minus_i = expm_real(&(&d * t)) - RMatrix::identity(m, m);
    let mean = lambda_h * t + (theta_v.transpose() * &exp_minus_i * &y)[(0, 0)];
    let pi_dh = dh.transpose() * &pi;
    let quad = pi_dh.dot(&y);
    let v = deflated_solve(&d, &pi, &(&exp_minus_i * &y))?;
    let variance = (lambda_h - 2.0 * lambda_h * lambda_h - 2.0 * quad) * t + 2.0 * pi_dh.dot(&v);
    Ok(CountingMoments { mean, variance, t, label: label.to_vec(), theta: theta.to_vec() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalRates {
    /// `lambda_h = pi D_h e` in batch order.
    pub per_batch: Vec<f64>,
    /// `lambda_r = sum_h h_r lambda_h`.
    pub per_type: Vec<f64>,
    /// `lambda = sum_h lambda_h`.
    pub batches_total: f64,
    pub customers_total: f64,
}

pub fn arrival_rates(state: &MmapState) -> Result<ArrivalRates> {
    let pi = stationary_phase(state)?;
    Ok(arrival_rates_with(state, &pi))
}

pub(crate) fn arrival_rates_with(state: &MmapState, pi: &DVector<f64>) -> ArrivalRates {
    let e = DVector::from_element(state.phases(), 1.0);
    let per_batch: Vec<f64> = state.batches.iter().map(|b| row_dot(pi, &b.matrix, &e)).collect();
    let mut per_type = vec![0.0; state.types()];
    for (b, lam) in state.batches.iter().zip(&per_batch) {
        for (r, &hr) in b.label.iter().enumerate() {
            per_type[r] += hr as f64 * lam;
        }
    }
    ArrivalRates {
        batches_total: per_batch.iter().sum(),
        customers_total: per_type.iter().sum(),
        per_batch,
        per_type,
    }
}

fn check_retention(p: &[f64], types: usize) -> Result<()> {
    if p.len() != types {
        return Err(Error::Domain(format!("expected {types} retention probabilities, got {}", p.len())));
    }
    if let Some(x) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::Domain(format!("retention probability {x} outside [0, 1]")));
    }
    Ok(())
}

/// `sum_h D_h prod_r [1 - p_r + z_r p_r]^{h_r}` for retention probabilities `p`
/// at one instant. `D0` is not included.
pub fn thinned_generator_pgf(state: &MmapState, z: &[Complex64], p: &[f64]) -> Result<CMatrix> {
    check_arity(state, z)?;
    check_polydisc(z)?;
    check_retention(p, state.types())?;
    let bracket: Vec<Complex64> = z.iter().zip(p).map(|(zr, &pr)| (1.0 - pr) + zr * pr).collect();
    let m = state.phases();
    let mut acc = CMatrix::zeros(m, m);
    for b in &state.batches {
        let w = monomial(&bracket, &b.label);
        acc.zip_apply(&b.matrix, |x, y| *x += w * y);
    }
    Ok(acc)
}

/// `exp( int_0^t [D0 + D_T(z, x)] dx )` with the integrand sampled at the grid
/// nodes (`p(x)` returns the retention vector at time `x`) and integrated by
/// the trapezoid rule.
pub fn thinned_counting_pgf(
    state: &MmapState,
    z: &[Complex64],
    p: &dyn Fn(f64) -> Vec<f64>,
    grid: &Grid,
    t: f64,
) -> Result<CMatrix> {
    let n = grid.index_of(t)?;
    let d0 = complexify(&state.d0);
    let m = state.phases();
    let mut integral = CMatrix::zeros(m, m);
    if n > 0 {
        let half = Complex64::new(0.5 * grid.step(), 0.0);
        for k in 0..=n {
            let w = if k == 0 || k == n { half } else { half * 2.0 };
            let dt = &d0 + thinned_generator_pgf(state, z, &p(grid.time(k)))?;
            integral += dt * w;
        }
    } else {
        check_arity(state, z)?;
        check_polydisc(z)?;
    }
    Ok(expm(&integral))
}
