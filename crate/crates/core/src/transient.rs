//! Transient joint transform of busy servers, served counts, in-system
//! resources and served resources for one environment state, without
//! catastrophes.
//!
//! The transform solves `dA/dt = [D0 + S(t)] A`, `A(0) = I`, where
//! `S(t) = sum_h D_h prod_r [z2_r G_r(s2) B_r(t) + z1_r F_r(s1) (1 - B_r(t))]^{h_r}`.
//! Two solvers are offered: classical RK4 on the grid ([`Method::Ode`]) and the
//! exponential of the trapezoid integral of the generator ([`Method::ClosedForm`]).
//! RK4 takes the half-step generator as the mean of the panel's end values
//! (right limit at the start, left limit at the end), so for one phase the
//! two agree up to the RK4 truncation of the exponential. For several phases
//! the exponential form ignores non-commutativity and the ODE is the reference.

use std::str::FromStr;

use num_complex::Complex64;

use crate::distribution::DistributionSpec;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridMatrixFunction};
use crate::linalg::{complexify, expm, CMatrix};
use crate::map_algebra::monomial;
use crate::model::{MmapState, ValidatedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Ode,
    ClosedForm,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ode" => Ok(Method::Ode),
            "closed-form" | "closed_form" => Ok(Method::ClosedForm),
            other => Err(Error::Domain(format!("unknown method `{other}`"))),
        }
    }
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Ode => "ode",
            Method::ClosedForm => "closed-form",
        }
    }
}

/// Which one-sided limit to take at a jump of a service law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

fn law_cdf(law: &DistributionSpec, t: f64, side: Side) -> f64 {
    match side {
        Side::Right => law.cdf(t),
        Side::Left => law.cdf_left(t),
    }
}

/// Evaluation coordinates `(z1, z2, s1, s2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformPoint {
    pub z1: Vec<Complex64>,
    pub z2: Vec<Complex64>,
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
}

fn ones(n: usize) -> Vec<Complex64> {
    vec![Complex64::new(1.0, 0.0); n]
}

impl TransformPoint {
    /// `z1 = z2 = 1`, `s1 = s2 = 0`.
    pub fn neutral(types: usize, components: usize) -> Self {
        TransformPoint { z1: ones(types), z2: ones(types), s1: vec![0.0; components], s2: vec![0.0; components] }
    }

    /// Marks busy servers and in-system resources only.
    pub fn busy(z1: Vec<Complex64>, s1: Vec<f64>) -> Self {
        let (k, c) = (z1.len(), s1.len());
        TransformPoint { z1, z2: ones(k), s1, s2: vec![0.0; c] }
    }

    /// Marks served customers and served resources only.
    pub fn served(z2: Vec<Complex64>, s2: Vec<f64>) -> Self {
        let (k, c) = (z2.len(), s2.len());
        TransformPoint { z1: ones(k), z2, s1: vec![0.0; c], s2 }
    }

    /// Same scalar `z` on every type for the busy-server count.
    pub fn busy_scalar(z: Complex64, types: usize, components: usize) -> Self {
        TransformPoint::busy(vec![z; types], vec![0.0; components])
    }

    pub fn check(&self, types: usize, components: usize) -> Result<()> {
        if self.z1.len() != types || self.z2.len() != types {
            return Err(Error::Domain(format!("z arguments need {types} entries")));
        }
        if self.s1.len() != components || self.s2.len() != components {
            return Err(Error::Domain(format!("s arguments need {components} entries")));
        }
        for z in self.z1.iter().chain(&self.z2) {
            if z.norm() > 1.0 + 1e-12 {
                return Err(Error::Domain(format!("|z| = {} exceeds 1", z.norm())));
            }
        }
        for &s in self.s1.iter().chain(&self.s2) {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Domain(format!("LST argument {s} must be nonnegative")));
            }
        }
        Ok(())
    }
}

/// One bracket `[served * B(t) + waiting * (1 - B(t))]^power`.
#[derive(Debug, Clone)]
struct Factor {
    served: Complex64,
    waiting: Complex64,
    law: DistributionSpec,
    power: u32,
}

#[derive(Debug, Clone)]
struct Term {
    matrix: CMatrix,
    factors: Vec<Factor>,
}

/// Time-dependent generator `D0 + sum_h c_h(t) D_h` with bracket coefficients.
#[derive(Debug, Clone)]
pub struct KernelPath {
    d0: CMatrix,
    terms: Vec<Term>,
}

impl KernelPath {
    fn new(d0: CMatrix) -> Self {
        KernelPath { d0, terms: Vec::new() }
    }

    fn push(&mut self, matrix: CMatrix, factors: Vec<Factor>) {
        self.terms.push(Term { matrix, factors });
    }

    fn coefficient(term: &Term, t: f64, side: Side) -> Complex64 {
        term.factors.iter().fold(Complex64::new(1.0, 0.0), |acc, f| {
            let b = law_cdf(&f.law, t, side);
            acc * (f.served * b + f.waiting * (1.0 - b)).powu(f.power)
        })
    }

    /// The batch part `S(t)`, without `D0`.
    pub fn kernel(&self, t: f64, side: Side) -> CMatrix {
        let m = self.d0.nrows();
        let mut acc = CMatrix::zeros(m, m);
        for term in &self.terms {
            let c = Self::coefficient(term, t, side);
            acc.zip_apply(&term.matrix, |x, y| *x += c * y);
        }
        acc
    }

    pub fn generator(&self, t: f64, side: Side) -> CMatrix {
        self.kernel(t, side) + &self.d0
    }

    /// Every jump of a service law inside the horizon must be a grid node.
    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        for term in &self.terms {
            for f in &term.factors {
                if let Some(a) = f.law.atom() {
                    grid.check_atom(a, "service law")?;
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, grid: &Grid, method: Method) -> Result<GridMatrixFunction> {
        self.check_grid(grid)?;
        let values = match method {
            Method::Ode => self.rk4(grid),
            Method::ClosedForm => self.exp_of_integral(grid),
        };
        Ok(GridMatrixFunction { grid: *grid, values })
    }

    fn rk4(&self, grid: &Grid) -> Vec<CMatrix> {
        let m = self.d0.nrows();
        let h = grid.step();
        let hc = Complex64::new(h, 0.0);
        let half = Complex64::new(0.5 * h, 0.0);
        let mut a = CMatrix::identity(m, m);
        let mut out = Vec::with_capacity(grid.steps() + 1);
        out.push(a.clone());
        for k in 0..grid.steps() {
            let t0 = grid.time(k);
            let k_start = self.generator(t0, Side::Right);
            let k_end = self.generator(grid.time(k + 1), Side::Left);
            let k_mid = (&k_start + &k_end) * Complex64::new(0.5, 0.0);
            let f1 = &k_start * &a;
            let f2 = &k_mid * (&a + &f1 * half);
            let f3 = &k_mid * (&a + &f2 * half);
            let f4 = &k_end * (&a + &f3 * hc);
            a += (f1 + (f2 + f3) * Complex64::new(2.0, 0.0) + f4) * Complex64::new(h / 6.0, 0.0);
            out.push(a.clone());
        }
        out
    }

    fn exp_of_integral(&self, grid: &Grid) -> Vec<CMatrix> {
        let m = self.d0.nrows();
        let half = Complex64::new(0.5 * grid.step(), 0.0);
        let mut integral = CMatrix::zeros(m, m);
        let mut out = Vec::with_capacity(grid.steps() + 1);
        out.push(CMatrix::identity(m, m));
        for k in 0..grid.steps() {
            let panel = self.generator(grid.time(k), Side::Right) + self.generator(grid.time(k + 1), Side::Left);
            integral += panel * half;
            out.push(expm(&integral));
        }
        out
    }
}

/// Kernel path of environment state `i` at `pt`, without domain checks.
pub(crate) fn service_kernel_path_unchecked(model: &ValidatedModel, i: usize, pt: &TransformPoint) -> KernelPath {
    let state = model.mmap(i);
    let res = model.resources();
    let served: Vec<Complex64> = (0..model.types()).map(|r| pt.z2[r] * res.departure_lst(r, &pt.s2)).collect();
    let waiting: Vec<Complex64> = (0..model.types()).map(|r| pt.z1[r] * res.arrival_lst(r, &pt.s1)).collect();
    let mut path = KernelPath::new(complexify(&state.d0));
    for b in &state.batches {
        let factors = b
            .label
            .iter()
            .enumerate()
            .filter(|(_, &h)| h > 0)
            .map(|(r, &h)| Factor {
                served: served[r],
                waiting: waiting[r],
                law: res.service_law(r, i).clone(),
                power: h,
            })
            .collect();
        path.push(complexify(&b.matrix), factors);
    }
    path
}

pub fn service_kernel_path(model: &ValidatedModel, i: usize, pt: &TransformPoint) -> Result<KernelPath> {
    check_state(model, i)?;
    pt.check(model.types(), model.components())?;
    Ok(service_kernel_path_unchecked(model, i, pt))
}

fn check_state(model: &ValidatedModel, i: usize) -> Result<()> {
    if i >= model.state_count() {
        return Err(Error::Domain(format!("environment state {i} out of range")));
    }
    Ok(())
}

/// `S_i(z1, z2, s1, s2, t)` (right-continuous in `t`).
pub fn service_kernel(model: &ValidatedModel, i: usize, pt: &TransformPoint, t: f64) -> Result<CMatrix> {
    Ok(service_kernel_path(model, i, pt)?.kernel(t, Side::Right))
}

/// The transform on every node of `grid`.
pub fn transient_path(
    model: &ValidatedModel,
    i: usize,
    pt: &TransformPoint,
    grid: &Grid,
    method: Method,
) -> Result<GridMatrixFunction> {
    service_kernel_path(model, i, pt)?.solve(grid, method)
}

/// `A^i(z1, z2, s1, s2, t)` on the model grid.
pub fn transient_transform(
    model: &ValidatedModel,
    i: usize,
    pt: &TransformPoint,
    t: f64,
    method: Method,
) -> Result<CMatrix> {
    let n = model.grid().index_of(t)?;
    let grid = Grid::with_steps(model.grid().step(), n);
    Ok(transient_path(model, i, pt, &grid, method)?.last().clone())
}

/// Number of busy servers and in-system resources (`z2 = 1`, `s2 = 0`).
pub fn busy_servers_transform(
    model: &ValidatedModel,
    i: usize,
    z1: &[Complex64],
    s1: &[f64],
    t: f64,
    method: Method,
) -> Result<CMatrix> {
    transient_transform(model, i, &TransformPoint::busy(z1.to_vec(), s1.to_vec()), t, method)
}

/// Served customers and served resources (`z1 = 1`, `s1 = 0`).
pub fn served_transform(
    model: &ValidatedModel,
    i: usize,
    z2: &[Complex64],
    s2: &[f64],
    t: f64,
    method: Method,
) -> Result<CMatrix> {
    transient_transform(model, i, &TransformPoint::served(z2.to_vec(), s2.to_vec()), t, method)
}

/// `prod_r [z2_r G_r(s2) B_ri(t) + 1 - B_ri(t)]^{h0_r}`: customers present at
/// time zero are marked only once served.
pub fn initial_customers_factor(model: &ValidatedModel, i: usize, pt: &TransformPoint, t: f64, h0: &[u32]) -> Complex64 {
    let res = model.resources();
    h0.iter()
        .enumerate()
        .filter(|(_, &h)| h > 0)
        .fold(Complex64::new(1.0, 0.0), |acc, (r, &h)| {
            let b = res.service_law(r, i).cdf(t);
            acc * (pt.z2[r] * res.departure_lst(r, &pt.s2) * b + (1.0 - b)).powu(h)
        })
}

pub fn initial_customers_transform(
    model: &ValidatedModel,
    i: usize,
    pt: &TransformPoint,
    t: f64,
    h0: &[u32],
    method: Method,
) -> Result<CMatrix> {
    if h0.len() != model.types() {
        return Err(Error::Domain(format!("h0 needs {} entries", model.types())));
    }
    let a = transient_transform(model, i, pt, t, method)?;
    Ok(a * initial_customers_factor(model, i, pt, t, h0))
}

/// Service and resource laws of one customer type for the renewal-input model.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomerClass {
    pub service: DistributionSpec,
    pub arrival_resource: Vec<DistributionSpec>,
    pub departure_resource: Vec<DistributionSpec>,
}

/// Batches of law `batch_law` arriving at renewal epochs with interarrival law
/// `interarrival`. Solves
/// `A(t) = 1 - F(t) + int_0^t S(t - u) A(t - u) dF(u)` by product-integration
/// trapezoid, with `S(x) = sum_n a(n) prod_r [z2 G B_r(x) + z1 F_r (1 - B_r(x))]^{n_r}`.
pub fn renewal_input_transform(
    batch_law: &[(Vec<u32>, f64)],
    interarrival: &DistributionSpec,
    classes: &[CustomerClass],
    pt: &TransformPoint,
    grid: &Grid,
) -> Result<Vec<Complex64>> {
    let total: f64 = batch_law.iter().map(|(_, p)| p).sum();
    if (total - 1.0).abs() > 1e-9 || batch_law.iter().any(|(_, p)| *p < 0.0) {
        return Err(Error::NonProbability(format!("batch law sums to {total}")));
    }
    let components = classes.first().map_or(0, |c| c.arrival_resource.len());
    pt.check(classes.len(), components)?;
    if let Some(a) = interarrival.atom() {
        grid.check_atom(a, "interarrival law")?;
    }
    for c in classes {
        if let Some(a) = c.service.atom() {
            grid.check_atom(a, "service law")?;
        }
    }
    let served: Vec<Complex64> = classes
        .iter()
        .enumerate()
        .map(|(r, c)| pt.z2[r] * c.departure_resource.iter().zip(&pt.s2).map(|(d, &s)| d.lst(s)).product::<f64>())
        .collect();
    let waiting: Vec<Complex64> = classes
        .iter()
        .enumerate()
        .map(|(r, c)| pt.z1[r] * c.arrival_resource.iter().zip(&pt.s1).map(|(d, &s)| d.lst(s)).product::<f64>())
        .collect();
    let kernel = |x: f64, side: Side| -> Complex64 {
        let bracket: Vec<Complex64> = classes
            .iter()
            .enumerate()
            .map(|(r, c)| {
                let b = law_cdf(&c.service, x, side);
                served[r] * b + waiting[r] * (1.0 - b)
            })
            .collect();
        batch_law.iter().map(|(h, p)| monomial(&bracket, h) * *p).sum()
    };

    let n = grid.steps();
    let cdf_plus: Vec<f64> = (0..=n).map(|k| interarrival.cdf(grid.time(k))).collect();
    let cdf_minus: Vec<f64> = (0..=n).map(|k| interarrival.cdf_left(grid.time(k))).collect();
    // continuous increment over panel k and atom at node k
    let cont: Vec<f64> = (0..=n).map(|k| if k == 0 { 0.0 } else { cdf_minus[k] - cdf_plus[k - 1] }).collect();
    let atom: Vec<f64> = (0..=n).map(|k| cdf_plus[k] - cdf_minus[k]).collect();

    let mut x_plus = vec![Complex64::new(1.0 - cdf_plus[0], 0.0)];
    let mut y_plus = vec![kernel(0.0, Side::Right) * x_plus[0]];
    let mut y_minus = vec![y_plus[0]];
    for m in 1..=n {
        let mut r = 0.5 * cont[1] * y_plus[m - 1];
        for k in 2..=m {
            r += 0.5 * cont[k] * (y_plus[m - k] + y_minus[m - k + 1]);
        }
        let mut atoms_minus = Complex64::new(0.0, 0.0);
        let mut atoms_plus = atom[m] * y_plus[0];
        for k in 1..m {
            atoms_minus += atom[k] * y_minus[m - k];
            atoms_plus += atom[k] * y_plus[m - k];
        }
        let t = grid.time(m);
        let s_minus = kernel(t, Side::Left);
        let s_plus = kernel(t, Side::Right);
        let xm = (1.0 - cdf_minus[m] + r + atoms_minus) / (1.0 - 0.5 * cont[1] * s_minus);
        let ym = s_minus * xm;
        let xp = 1.0 - cdf_plus[m] + r + 0.5 * cont[1] * ym + atoms_plus;
        y_minus.push(ym);
        y_plus.push(s_plus * xp);
        x_plus.push(xp);
    }
    Ok(x_plus)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchServiceMode {
    /// A batch is served as one customer with law `B0`; `D1 = sum_h D_h`.
    WholeBatch,
    /// Every customer of a batch has law `B`; batches grouped by size `n`.
    SameBatchService,
}

/// Batch-service PGF of the number of busy servers (or busy batches).
pub fn batch_service_pgf(
    state: &MmapState,
    law: &DistributionSpec,
    z: Complex64,
    grid: &Grid,
    t: f64,
    mode: BatchServiceMode,
    method: Method,
) -> Result<CMatrix> {
    if z.norm() > 1.0 + 1e-12 {
        return Err(Error::Domain(format!("|z| = {} exceeds 1", z.norm())));
    }
    let n = grid.index_of(t)?;
    let m = state.phases();
    let mut path = KernelPath::new(complexify(&state.d0));
    let factor = |power| Factor { served: Complex64::new(1.0, 0.0), waiting: z, law: law.clone(), power };
    match mode {
        BatchServiceMode::WholeBatch => {
            let mut d1 = CMatrix::zeros(m, m);
            for b in &state.batches {
                d1 += complexify(&b.matrix);
            }
            path.push(d1, vec![factor(1)]);
        }
        BatchServiceMode::SameBatchService => {
            let mut sizes: Vec<u32> = state.batches.iter().map(|b| b.size()).collect();
            sizes.sort_unstable();
            sizes.dedup();
            for size in sizes {
                let mut dn = CMatrix::zeros(m, m);
                for b in state.batches.iter().filter(|b| b.size() == size) {
                    dn += complexify(&b.matrix);
                }
                path.push(dn, vec![factor(size)]);
            }
        }
    }
    let sub = Grid::with_steps(grid.step(), n);
    Ok(path.solve(&sub, method)?.last().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{poisson_model, static_env};
    use crate::model::{validate_model, Batch, NumericSpec};
    use crate::linalg::RMatrix;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn mm_inf(lambda: f64, mu: f64, step: f64) -> ValidatedModel {
        let mut cfg = poisson_model(lambda, mu, static_env());
        cfg.numeric = NumericSpec::new(20.0, step);
        validate_model(&cfg).unwrap()
    }

    #[test]
    fn scalar_kernel_value() {
        let m = mm_inf(2.0, 1.0, 0.01);
        let pt = TransformPoint::busy(vec![c(0.0)], vec![0.0]);
        let s = service_kernel(&m, 0, &pt, 1.0).unwrap();
        assert!((s[(0, 0)].re - 2.0 * (1.0 - (-1.0f64).exp())).abs() < 1e-14);
        let neutral = service_kernel(&m, 0, &TransformPoint::neutral(1, 1), 0.7).unwrap();
        assert!((neutral[(0, 0)].re - 2.0).abs() < 1e-14);
    }

    #[test]
    fn mm_inf_transient_pgf() {
        let m = mm_inf(1.0, 1.0, 0.001);
        let pt = TransformPoint::busy(vec![c(0.0)], vec![0.0]);
        let want = (-(1.0 - (-1.0f64).exp())).exp();
        for method in [Method::Ode, Method::ClosedForm] {
            let a = transient_transform(&m, 0, &pt, 1.0, method).unwrap();
            assert!((a[(0, 0)].re - want).abs() < 1e-6, "{method:?}");
        }
        let stationary = busy_servers_transform(&m, 0, &[c(0.0)], &[0.0], 20.0, Method::Ode).unwrap();
        assert!((stationary[(0, 0)].re - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn served_scalar_value() {
        let m = mm_inf(1.0, 1.0, 0.001);
        let w = served_transform(&m, 0, &[c(0.0)], &[0.0], 1.0, Method::Ode).unwrap();
        assert!((w[(0, 0)].re - (-(-1.0f64).exp()).exp()).abs() < 1e-6);
        let w0 = served_transform(&m, 0, &[c(0.0)], &[0.0], 0.0, Method::Ode).unwrap();
        assert_eq!(w0[(0, 0)], c(1.0));
    }

    #[test]
    fn initial_customer_prefactor() {
        let m = mm_inf(1.0, 2f64.ln(), 0.001);
        // B(1) = 1 - e^{-ln 2} = 0.5
        let pt = TransformPoint::served(vec![c(0.0)], vec![0.0]);
        let f = initial_customers_factor(&m, 0, &pt, 1.0, &[3]);
        assert!((f.re - 0.125).abs() < 1e-14);
    }

    #[test]
    fn renewal_input_neutral_and_poisson() {
        let grid = Grid::new(3.0, 0.01).unwrap();
        let class = CustomerClass {
            service: DistributionSpec::exponential(1.0),
            arrival_resource: vec![DistributionSpec::exponential(1.0)],
            departure_resource: vec![DistributionSpec::exponential(1.0)],
        };
        let law = vec![(vec![1], 1.0)];
        let neutral = renewal_input_transform(&law, &DistributionSpec::exponential(1.5), &[class.clone()], &TransformPoint::neutral(1, 1), &grid).unwrap();
        assert!(neutral.iter().all(|x| (x - c(1.0)).norm() < 1e-13));
        let pt = TransformPoint::busy(vec![c(0.3)], vec![0.0]);
        let a = renewal_input_transform(&law, &DistributionSpec::exponential(1.5), &[class], &pt, &grid).unwrap();
        let t = 3.0;
        let want = (1.5 * (0.3 - 1.0) * (1.0 - (-t as f64).exp())).exp();
        assert!((a[300].re - want).abs() < 1e-4);
        assert!(renewal_input_transform(&[(vec![1], 0.9)], &DistributionSpec::exponential(1.0), &[], &pt, &grid).is_err());
    }

    #[test]
    fn whole_batch_scalar() {
        let s = MmapState::new(
            RMatrix::from_element(1, 1, -2.0),
            vec![Batch { label: vec![1], matrix: RMatrix::from_element(1, 1, 2.0) }],
        );
        let grid = Grid::new(1.0, 0.001).unwrap();
        let p = batch_service_pgf(&s, &DistributionSpec::exponential(1.0), c(0.0), &grid, 1.0, BatchServiceMode::WholeBatch, Method::Ode).unwrap();
        assert!((p[(0, 0)].re - (-2.0 * (1.0 - (-1.0f64).exp())).exp()).abs() < 1e-6);
    }

    #[test]
    fn second_order_in_the_step() {
        let want = (-(1.0 - (-1.0f64).exp())).exp();
        let pt = TransformPoint::busy(vec![c(0.0)], vec![0.0]);
        let err = |h: f64| (transient_transform(&mm_inf(1.0, 1.0, h), 0, &pt, 1.0, Method::Ode).unwrap()[(0, 0)].re - want).abs();
        let ratio = err(0.02) / err(0.01);
        assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn one_phase_methods_agree() {
        let m = mm_inf(1.5, 0.7, 0.01);
        let pt = TransformPoint::busy(vec![c(0.2)], vec![0.4]);
        for t in [0.5, 1.0, 3.0] {
            let a = transient_transform(&m, 0, &pt, t, Method::Ode).unwrap();
            let b = transient_transform(&m, 0, &pt, t, Method::ClosedForm).unwrap();
            assert!((a[(0, 0)] - b[(0, 0)]).norm() < 1e-8);
        }
    }

    #[test]
    fn off_grid_atom_is_rejected() {
        let mut cfg = poisson_model(1.0, 1.0, static_env());
        cfg.service[0][0] = DistributionSpec::deterministic(0.555);
        cfg.numeric = NumericSpec::new(1.0, 0.01);
        let m = validate_model(&cfg).unwrap();
        let r = transient_transform(&m, 0, &TransformPoint::neutral(1, 1), 1.0, Method::Ode);
        assert!(matches!(r, Err(Error::Grid(_))));
    }
}
