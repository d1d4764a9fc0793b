//! The catastrophe model of the queue: per-state no-catastrophe transforms
//! mixed through the environment's Markov renewal structure.
//!
//! The base of environment state `i` is the scalar `theta_i A^i(t) e`, where
//! the phase law at the start of a sojourn is the stationary phase law of
//! `D(i)`. This is exact when phases are redrawn at every environment jump,
//! and also when every state shares one phase generator `D` and the phase
//! process starts stationary.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::ValidatedModel;
use crate::renewal::{
    catastrophe_stationary, catastrophe_transient, catastrophe_via_renewal, exponential_rates,
    exponential_sojourn_stationary, laplace_transform, mix_initial, renewal_matrix_from, stationary_grid,
    stationary_weights, KernelIncrements, Mixable, StationaryWeights,
};
use crate::transient::{initial_customers_factor, service_kernel_path_unchecked, Method, TransformPoint};

/// Step used by the finite-difference derivatives in `z`.
pub const DERIVATIVE_STEP: f64 = 1e-3;

/// Which discretization of the renewal mixture to use for transient values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RenewalRoute {
    /// `L_i = (1 - F_i) Pbar_i + sum_j L_j * dQ_ij`.
    #[default]
    Volterra,
    /// `L_i = (1 - F_i) Pbar_i + sum_j [(1 - F_j) Pbar_j] * dH_ij`.
    RenewalMeasure,
}

/// Transient catastrophe-model transform on the model grid.
#[derive(Debug, Clone)]
pub struct TransientTransform {
    pub grid: Grid,
    /// `L(., t_k, i)`: started in environment state `i`.
    pub per_state: Vec<Vec<Complex64>>,
    /// `sum_i p0_i L(., t_k, i)`.
    pub mixed: Vec<Complex64>,
}

/// Central difference at `1` with one Richardson step:
/// `(4 D(h/2) - D(h)) / 3`, `D(h) = (f(1 + h) - f(1 - h)) / 2h`.
pub fn richardson_derivative<V: Mixable>(f: impl Fn(f64) -> Result<V>, h: f64) -> Result<V> {
    let central = |step: f64| -> Result<V> {
        let mut d = f(1.0 + step)?;
        d.axpy(-1.0, &f(1.0 - step)?);
        Ok(d.scaled(0.5 / step))
    };
    let coarse = central(h)?;
    let mut fine = central(0.5 * h)?.scaled(4.0 / 3.0);
    fine.axpy(-1.0 / 3.0, &coarse);
    Ok(fine)
}

pub struct Analyzer<'a> {
    model: &'a ValidatedModel,
    method: Method,
    route: RenewalRoute,
    inc: KernelIncrements,
    weights: StationaryWeights,
    theta: Vec<Vec<f64>>,
}

impl<'a> Analyzer<'a> {
    pub fn new(model: &'a ValidatedModel, method: Method) -> Result<Self> {
        let inc = KernelIncrements::new(model.environment(), model.grid())?;
        let weights = stationary_weights(model.environment())?;
        let theta = (0..model.state_count())
            .map(|i| model.phase_stationary(i).map(|p| p.iter().copied().collect()))
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(Analyzer { model, method, route: RenewalRoute::default(), inc, weights, theta })
    }

    pub fn with_route(mut self, route: RenewalRoute) -> Self {
        self.route = route;
        self
    }

    pub fn model(&self) -> &ValidatedModel {
        self.model
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn weights(&self) -> &StationaryWeights {
        &self.weights
    }

    /// Phase law at the start of a sojourn in state `i`.
    pub fn theta(&self, i: usize) -> &[f64] {
        &self.theta[i]
    }

    fn check_point(&self, pt: &TransformPoint) -> Result<()> {
        pt.check(self.model.types(), self.model.components())
    }

    /// `theta_i A^i(t_k) e` for every state on `grid`.
    pub fn base_paths(&self, pt: &TransformPoint, grid: &Grid) -> Result<Vec<Vec<Complex64>>> {
        (0..self.model.state_count())
            .map(|i| {
                let path = service_kernel_path_unchecked(self.model, i, pt).solve(grid, self.method)?;
                Ok(path.scalar_path(&self.theta[i]))
            })
            .collect()
    }

    fn transient_unchecked(&self, pt: &TransformPoint) -> Result<TransientTransform> {
        let grid = *self.model.grid();
        let base = self.base_paths(pt, &grid)?;
        let h0 = self.model.initial_customers();
        let first: Option<Vec<Vec<Complex64>>> = h0.iter().any(|&h| h > 0).then(|| {
            base.iter()
                .enumerate()
                .map(|(i, path)| {
                    path.iter()
                        .enumerate()
                        .map(|(k, v)| v * initial_customers_factor(self.model, i, pt, grid.time(k), h0))
                        .collect()
                })
                .collect()
        });
        let per_state = match self.route {
            RenewalRoute::Volterra => catastrophe_transient(&self.inc, &base, first.as_deref())?,
            RenewalRoute::RenewalMeasure => {
                let h = renewal_matrix_from(self.model.environment(), &self.inc)?;
                catastrophe_via_renewal(&self.inc, &h, &base, first.as_deref())
            }
        };
        let mixed = mix_initial(self.model.environment().initial(), &per_state);
        Ok(TransientTransform { grid, per_state, mixed })
    }

    /// Transient catastrophe-model transform at every node of the model grid.
    pub fn transient(&self, pt: &TransformPoint) -> Result<TransientTransform> {
        self.check_point(pt)?;
        self.transient_unchecked(pt)
    }

    /// Mixed transient value at `t`.
    pub fn transient_at(&self, pt: &TransformPoint, t: f64) -> Result<Complex64> {
        let k = self.model.grid().index_of(t)?;
        Ok(self.transient(pt)?.mixed[k])
    }

    /// Grid for stationary integrals: the sojourn tail horizon, or for a static
    /// environment the point where every service survival is negligible.
    pub fn stationary_grid(&self) -> Result<Grid> {
        let step = self.model.grid().step();
        let tol = self.model.tail_tolerance();
        let cap = self.model.max_stationary_horizon();
        let env = self.model.environment();
        if env.is_static() {
            let res = self.model.resources();
            let horizon = (0..self.model.types())
                .map(|r| res.service_law(r, 0).tail_quantile(tol))
                .fold(step, f64::max);
            if horizon > cap {
                return Err(Error::Truncation(format!("service tail reaches {horizon:.3}, beyond the cap {cap}")));
            }
            return Ok(Grid::with_steps(step, 1).extended_to(horizon));
        }
        stationary_grid(env, step, tol, cap)
    }

    fn stationary_unchecked(&self, pt: &TransformPoint) -> Result<Complex64> {
        let grid = self.stationary_grid()?;
        let base = self.base_paths(pt, &grid)?;
        if self.model.environment().is_static() {
            return Ok(*base[0].last().expect("nonempty path"));
        }
        let inc = KernelIncrements::new(self.model.environment(), &grid)?;
        Ok(catastrophe_stationary(&inc, &self.weights, &base).value)
    }

    /// Stationary catastrophe-model transform; independent of the initial state.
    pub fn stationary(&self, pt: &TransformPoint) -> Result<Complex64> {
        self.check_point(pt)?;
        self.stationary_unchecked(pt)
    }

    /// Stationary transform for exponential sojourns through the Laplace form
    /// `sum_i q_i v_i Phat_i(v_i)`.
    pub fn stationary_exponential(&self, pt: &TransformPoint) -> Result<Complex64> {
        self.check_point(pt)?;
        let env = self.model.environment();
        let v = exponential_rates(env)?;
        let tol = self.model.tail_tolerance();
        let slowest = v.iter().copied().fold(f64::INFINITY, f64::min);
        let horizon = (1.0 / tol).ln() / slowest;
        if horizon > self.model.max_stationary_horizon() {
            return Err(Error::Truncation(format!("Laplace kernel tail reaches {horizon:.3}")));
        }
        let grid = Grid::with_steps(self.model.grid().step(), 1).extended_to(horizon);
        let base = self.base_paths(pt, &grid)?;
        let laplace: Vec<Complex64> = base.iter().zip(&v).map(|(path, &vi)| laplace_transform(&grid, path, vi)).collect();
        exponential_sojourn_stationary(env, &self.weights, &laplace)
    }

    fn type_point(&self, r: Option<usize>, z: f64) -> TransformPoint {
        let k = self.model.types();
        let z1 = (0..k)
            .map(|q| if r.is_none() || r == Some(q) { Complex64::new(z, 0.0) } else { Complex64::new(1.0, 0.0) })
            .collect();
        TransformPoint::busy(z1, vec![0.0; self.model.components()])
    }

    /// Mean number of busy servers of type `r` (all types for `None`) at every
    /// node: the `z1`-derivative of the base, mixed through the renewal operator.
    pub fn transient_means(&self, r: Option<usize>) -> Result<Vec<f64>> {
        let grid = *self.model.grid();
        let per_state_means: Vec<Vec<f64>> = richardson_derivative(
            |z| {
                let base = self.base_paths(&self.type_point(r, z), &grid)?;
                Ok(base.into_iter().map(|p| p.into_iter().map(|c| c.re).collect::<Vec<f64>>()).collect::<Vec<_>>())
            },
            DERIVATIVE_STEP,
        )?;
        let per_state = catastrophe_transient(&self.inc, &per_state_means, None)?;
        Ok(mix_initial(self.model.environment().initial(), &per_state))
    }

    /// `d/dz` of the stationary transform at `z = 1` for type `r` (all types for `None`).
    pub fn stationary_mean_by_derivative(&self, r: Option<usize>) -> Result<f64> {
        richardson_derivative(|z| Ok(self.stationary_unchecked(&self.type_point(r, z))?.re), DERIVATIVE_STEP)
    }

    /// Stationary PGF of the total number of busy servers at a complex `z`.
    pub fn stationary_pgf(&self, z: Complex64) -> Result<Complex64> {
        let pt = TransformPoint::busy_scalar(z, self.model.types(), self.model.components());
        self.stationary(&pt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{exp_env, poisson_model, static_env};
    use crate::model::{validate_model, NumericSpec};

    #[test]
    fn mm_inf_with_catastrophes_stationary_mean() {
        let mut cfg = poisson_model(1.0, 1.0, exp_env(1.0));
        cfg.numeric = NumericSpec::new(2.0, 0.01);
        let m = validate_model(&cfg).unwrap();
        let a = Analyzer::new(&m, Method::Ode).unwrap();
        let mean = a.stationary_mean_by_derivative(None).unwrap();
        assert!((mean - 0.5).abs() < 1e-4, "{mean}");
        let neutral = a.stationary(&TransformPoint::neutral(1, 1)).unwrap();
        assert!((neutral.re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_system_probability() {
        // v int_0^inf e^{-vu} exp(-(1 - e^{-u})) du at v = 1, by composite Simpson on [0, 40]
        let f = |u: f64| (-u).exp() * (-(1.0 - (-u).exp())).exp();
        let n = 40_000;
        let h = 40.0 / n as f64;
        let simpson = (0..=n)
            .map(|k| {
                let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                w * f(k as f64 * h)
            })
            .sum::<f64>()
            * h
            / 3.0;
        assert!((simpson - (1.0 - (-1.0f64).exp())).abs() < 1e-12);

        let err = |step: f64| {
            let mut cfg = poisson_model(1.0, 1.0, exp_env(1.0));
            cfg.numeric = NumericSpec::new(2.0, step);
            let m = validate_model(&cfg).unwrap();
            let a = Analyzer::new(&m, Method::Ode).unwrap();
            a.stationary_pgf(Complex64::new(0.0, 0.0)).unwrap().re - simpson
        };
        let (coarse, fine) = (err(0.01), err(0.005));
        assert!(fine.abs() < 3e-6);
        assert!(((coarse / fine).log2() - 2.0).abs() < 0.05);
        assert!(((4.0 * fine - coarse) / 3.0).abs() < 1e-8);
    }

    #[test]
    fn static_transient_mean() {
        let mut cfg = poisson_model(1.0, 1.0, static_env());
        cfg.numeric = NumericSpec::new(1.0, 0.01);
        let m = validate_model(&cfg).unwrap();
        let a = Analyzer::new(&m, Method::Ode).unwrap();
        let w = a.transient_means(None).unwrap();
        assert!((w[100] - (1.0 - (-1.0f64).exp())).abs() < 1e-5);
        assert_eq!(w[0], 0.0);
    }
}
