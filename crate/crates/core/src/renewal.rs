//! Markov-renewal machinery for the semi-Markov environment.
//!
//! Every solver here works on the uniform grid with product-integration
//! trapezoid weights. Kernel atoms (deterministic sojourns) must sit on grid
//! nodes and are integrated exactly; functions that jump at such atoms are
//! tracked through both one-sided limits, `plus` (right limit, the value) and
//! `minus` (left limit).
//!
//! The operators are generic over [`Mixable`] values so the same code handles
//! scalar transforms, matrix transforms and renewal-matrix rows.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{stationary_of_stochastic, CMatrix, RMatrix};
use crate::model::Environment;

/// Values that can be combined linearly with real weights.
pub trait Mixable: Clone + Send + Sync {
    fn zero_like(&self) -> Self;
    /// `self += a * x`
    fn axpy(&mut self, a: f64, x: &Self);

    fn scaled(&self, a: f64) -> Self {
        let mut out = self.zero_like();
        out.axpy(a, self);
        out
    }
}

impl Mixable for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }
}

impl Mixable for Complex64 {
    fn zero_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += x * a;
    }
}

impl Mixable for CMatrix {
    fn zero_like(&self) -> Self {
        CMatrix::zeros(self.nrows(), self.ncols())
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        self.zip_apply(x, |s, v| *s += v * a);
    }
}

impl Mixable for DVector<f64> {
    fn zero_like(&self) -> Self {
        DVector::zeros(self.len())
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        self.axpy(a, x, 1.0);
    }
}

/// Componentwise, for whole paths and per-state collections.
impl<V: Mixable> Mixable for Vec<V> {
    fn zero_like(&self) -> Self {
        self.iter().map(Mixable::zero_like).collect()
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x) {
            s.axpy(a, v);
        }
    }
}

/// Kernel `Q(t)` discretized on a grid: continuous mass per panel, atoms per
/// node, and both limits of every sojourn survival `1 - F_i`.
#[derive(Debug, Clone)]
pub struct KernelIncrements {
    grid: Grid,
    states: usize,
    /// `cont[k] = Q(t_k-) - Q(t_{k-1})`, `cont[0] = 0`.
    cont: Vec<RMatrix>,
    /// `atom[k] = Q(t_k) - Q(t_k-)`.
    atom: Vec<RMatrix>,
    atom_nodes: Vec<usize>,
    survival_plus: Vec<Vec<f64>>,
    survival_minus: Vec<Vec<f64>>,
}

impl KernelIncrements {
    pub fn new(env: &Environment, grid: &Grid) -> Result<Self> {
        let s = env.state_count();
        for i in 0..s {
            for (_, _, d) in env.transitions(i) {
                if let Some(a) = d.atom() {
                    grid.check_atom(a, &format!("sojourn law of state {i}"))?;
                }
            }
        }
        let n = grid.steps();
        let mut q_plus = Vec::with_capacity(n + 1);
        let mut q_minus = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let t = grid.time(k);
            let mut plus = RMatrix::zeros(s, s);
            let mut minus = RMatrix::zeros(s, s);
            for i in 0..s {
                for (j, p, d) in env.transitions(i) {
                    plus[(i, *j)] += p * d.cdf(t);
                    minus[(i, *j)] += p * d.cdf_left(t);
                }
            }
            q_plus.push(plus);
            q_minus.push(minus);
        }
        let mut cont = vec![RMatrix::zeros(s, s)];
        for k in 1..=n {
            cont.push(&q_minus[k] - &q_plus[k - 1]);
        }
        let atom: Vec<RMatrix> = (0..=n).map(|k| &q_plus[k] - &q_minus[k]).collect();
        let atom_nodes = (0..=n).filter(|&k| atom[k].iter().any(|&x| x != 0.0)).collect();
        let survival_plus = (0..s)
            .map(|i| (0..=n).map(|k| 1.0 - q_plus[k].row(i).sum()).collect())
            .collect();
        let survival_minus = (0..s)
            .map(|i| (0..=n).map(|k| 1.0 - q_minus[k].row(i).sum()).collect())
            .collect();
        Ok(KernelIncrements { grid: *grid, states: s, cont, atom, atom_nodes, survival_plus, survival_minus })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn states(&self) -> usize {
        self.states
    }

    /// `1 - F_i(t_k)`.
    pub fn survival(&self, i: usize, k: usize) -> f64 {
        self.survival_plus[i][k]
    }

    /// `1 - F_i(t_k-)`.
    pub fn survival_left(&self, i: usize, k: usize) -> f64 {
        self.survival_minus[i][k]
    }
}

/// Both one-sided limits of a solution at every node.
#[derive(Debug, Clone)]
pub struct Limits<V> {
    pub plus: Vec<V>,
    pub minus: Vec<V>,
}

/// Solves `X_i(t) = g_i(t) + sum_j int_[0,t] X_j(t - u) dQ_ij(u)` on the grid.
///
/// `g_plus[i][k]`, `g_minus[i][k]` are the right and left limits of `g_i` at
/// node `k`. The diagonal panel enters implicitly through `(I - C_1 / 2)^{-1}`.
pub fn solve_markov_renewal<V: Mixable>(
    inc: &KernelIncrements,
    g_plus: &[Vec<V>],
    g_minus: &[Vec<V>],
) -> Result<Vec<Limits<V>>> {
    let s = inc.states;
    let n = inc.grid.steps();
    let mut out: Vec<Limits<V>> = (0..s)
        .map(|i| Limits { plus: vec![g_plus[i][0].clone()], minus: vec![g_plus[i][0].clone()] })
        .collect();
    if n == 0 {
        return Ok(out);
    }
    let c1 = &inc.cont[1];
    let implicit = (RMatrix::identity(s, s) - c1 * 0.5)
        .try_inverse()
        .ok_or_else(|| Error::Singular("I - C_1 / 2".into()))?;
    let zero = g_plus[0][0].zero_like();
    for m in 1..=n {
        let mut r: Vec<V> = vec![zero.clone(); s];
        let mut atoms_minus: Vec<V> = vec![zero.clone(); s];
        let mut atoms_plus: Vec<V> = vec![zero.clone(); s];
        for i in 0..s {
            for j in 0..s {
                let xj = &out[j];
                let w1 = 0.5 * c1[(i, j)];
                if w1 != 0.0 {
                    r[i].axpy(w1, &xj.plus[m - 1]);
                }
                for k in 2..=m {
                    let w = 0.5 * inc.cont[k][(i, j)];
                    if w != 0.0 {
                        r[i].axpy(w, &xj.plus[m - k]);
                        r[i].axpy(w, &xj.minus[m - k + 1]);
                    }
                }
                for &k in inc.atom_nodes.iter().take_while(|&&k| k <= m) {
                    let a = inc.atom[k][(i, j)];
                    if a == 0.0 {
                        continue;
                    }
                    atoms_plus[i].axpy(a, &xj.plus[m - k]);
                    if k < m {
                        atoms_minus[i].axpy(a, &xj.minus[m - k]);
                    }
                }
            }
        }
        let rhs: Vec<V> = (0..s)
            .map(|i| {
                let mut y = g_minus[i][m].clone();
                y.axpy(1.0, &r[i]);
                y.axpy(1.0, &atoms_minus[i]);
                y
            })
            .collect();
        let minus: Vec<V> = (0..s)
            .map(|i| {
                let mut x = zero.clone();
                for j in 0..s {
                    x.axpy(implicit[(i, j)], &rhs[j]);
                }
                x
            })
            .collect();
        for i in 0..s {
            let mut x = g_plus[i][m].clone();
            x.axpy(1.0, &r[i]);
            x.axpy(1.0, &atoms_plus[i]);
            for j in 0..s {
                let w1 = 0.5 * c1[(i, j)];
                if w1 != 0.0 {
                    x.axpy(w1, &minus[j]);
                }
            }
            out[i].plus.push(x);
        }
        for (i, x) in minus.into_iter().enumerate() {
            out[i].minus.push(x);
        }
    }
    Ok(out)
}

/// Markov renewal function `H_ij(t)`: expected number of entries into `j`
/// during `(0, t]` starting from `i`, from `H = Q + dQ * H`.
#[derive(Debug, Clone)]
pub struct RenewalSolution {
    pub grid: Grid,
    pub plus: Vec<RMatrix>,
    pub minus: Vec<RMatrix>,
}

impl RenewalSolution {
    pub fn at(&self, t: f64) -> Result<&RMatrix> {
        Ok(&self.plus[self.grid.index_of(t)?])
    }

    /// `H_j(t) = sum_k p0_k H_kj(t)` at every node.
    pub fn weighted(&self, p0: &[f64]) -> Vec<DVector<f64>> {
        let w = DVector::from_column_slice(p0);
        self.plus.iter().map(|h| h.transpose() * &w).collect()
    }
}

pub fn renewal_matrix(env: &Environment, grid: &Grid) -> Result<RenewalSolution> {
    let inc = KernelIncrements::new(env, grid)?;
    renewal_matrix_from(env, &inc)
}

pub fn renewal_matrix_from(env: &Environment, inc: &KernelIncrements) -> Result<RenewalSolution> {
    let s = inc.states;
    let grid = inc.grid;
    let n = grid.steps();
    let row = |i: usize, t: f64, left: bool| -> DVector<f64> {
        let mut v = DVector::zeros(s);
        for (j, p, d) in env.transitions(i) {
            v[*j] += p * if left { d.cdf_left(t) } else { d.cdf(t) };
        }
        v
    };
    let g_plus: Vec<Vec<DVector<f64>>> = (0..s).map(|i| (0..=n).map(|k| row(i, grid.time(k), false)).collect()).collect();
    let g_minus: Vec<Vec<DVector<f64>>> = (0..s).map(|i| (0..=n).map(|k| row(i, grid.time(k), true)).collect()).collect();
    let rows = solve_markov_renewal(inc, &g_plus, &g_minus)?;
    let assemble = |minus: bool| -> Vec<RMatrix> {
        (0..=n)
            .map(|k| {
                RMatrix::from_fn(s, s, |i, j| if minus { rows[i].minus[k][j] } else { rows[i].plus[k][j] })
            })
            .collect()
    };
    Ok(RenewalSolution { grid, plus: assemble(false), minus: assemble(true) })
}

fn survival_weighted<V: Mixable>(inc: &KernelIncrements, base: &[Vec<V>], left: bool) -> Vec<Vec<V>> {
    base.iter()
        .enumerate()
        .map(|(i, path)| {
            path.iter()
                .enumerate()
                .map(|(k, v)| v.scaled(if left { inc.survival_left(i, k) } else { inc.survival(i, k) }))
                .collect()
        })
        .collect()
}

fn add_initial_customers<V: Mixable>(
    inc: &KernelIncrements,
    values: &mut [Vec<V>],
    base: &[Vec<V>],
    first: Option<&[Vec<V>]>,
) {
    if let Some(first) = first {
        for (i, path) in values.iter_mut().enumerate() {
            for (k, v) in path.iter_mut().enumerate() {
                let s = inc.survival(i, k);
                v.axpy(s, &first[i][k]);
                v.axpy(-s, &base[i][k]);
            }
        }
    }
}

/// Catastrophe-model transform from the equation
/// `L_i(t) = (1 - F_i(t)) Pbar_i(t) + sum_j int L_j(t - u) dQ_ij(u)`.
///
/// `base[i][k]` is the no-catastrophe transform of state `i` at node `k`
/// (continuous in time). `first`, when given, replaces the base in the
/// leading term only (customers present at time zero). Returns the right
/// limits `L_i(t_k)`. This form conserves probability exactly on the grid.
pub fn catastrophe_transient<V: Mixable>(
    inc: &KernelIncrements,
    base: &[Vec<V>],
    first: Option<&[Vec<V>]>,
) -> Result<Vec<Vec<V>>> {
    let g_plus = survival_weighted(inc, base, false);
    let g_minus = survival_weighted(inc, base, true);
    let sol = solve_markov_renewal(inc, &g_plus, &g_minus)?;
    let mut values: Vec<Vec<V>> = sol.into_iter().map(|l| l.plus).collect();
    add_initial_customers(inc, &mut values, base, first);
    Ok(values)
}

/// Same transform through the renewal measure:
/// `L_i(t) = (1 - F_i(t)) Pbar_i(t) + sum_j int (1 - F_j(t - u)) Pbar_j(t - u) dH_ij(u)`.
pub fn catastrophe_via_renewal<V: Mixable>(
    inc: &KernelIncrements,
    h: &RenewalSolution,
    base: &[Vec<V>],
    first: Option<&[Vec<V>]>,
) -> Vec<Vec<V>> {
    let s = inc.states;
    let n = inc.grid.steps();
    let g_plus = survival_weighted(inc, base, false);
    let g_minus = survival_weighted(inc, base, true);
    let mut values: Vec<Vec<V>> = Vec::with_capacity(s);
    for i in 0..s {
        let mut path = Vec::with_capacity(n + 1);
        for m in 0..=n {
            let mut acc = g_plus[i][m].clone();
            for j in 0..s {
                for k in 1..=m {
                    let dc = h.minus[k][(i, j)] - h.plus[k - 1][(i, j)];
                    if dc != 0.0 {
                        acc.axpy(0.5 * dc, &g_plus[j][m - k]);
                        acc.axpy(0.5 * dc, &g_minus[j][m - k + 1]);
                    }
                    let da = h.plus[k][(i, j)] - h.minus[k][(i, j)];
                    if da != 0.0 {
                        acc.axpy(da, &g_plus[j][m - k]);
                    }
                }
            }
            path.push(acc);
        }
        values.push(path);
    }
    add_initial_customers(inc, &mut values, base, first);
    values
}

/// `sum_i p0_i L_i` at every node.
pub fn mix_initial<V: Mixable>(p0: &[f64], per_state: &[Vec<V>]) -> Vec<V> {
    let n = per_state[0].len();
    (0..n)
        .map(|k| {
            let mut acc = per_state[0][k].zero_like();
            for (i, w) in p0.iter().enumerate() {
                if *w != 0.0 {
                    acc.axpy(*w, &per_state[i][k]);
                }
            }
            acc
        })
        .collect()
}

/// Mean sojourns, embedded stationary law and time-stationary state weights.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryWeights {
    pub eta: Vec<f64>,
    pub rho: Vec<f64>,
    pub q: Vec<f64>,
}

pub fn stationary_weights(env: &Environment) -> Result<StationaryWeights> {
    let s = env.state_count();
    if env.is_static() {
        return Ok(StationaryWeights { eta: vec![f64::INFINITY; s], rho: vec![1.0], q: vec![1.0] });
    }
    let rho = stationary_of_stochastic(&env.transition_matrix())?;
    let eta: Vec<f64> = (0..s).map(|i| env.mean_sojourn(i)).collect();
    let total: f64 = (0..s).map(|i| eta[i] * rho[i]).sum();
    let q = (0..s).map(|i| eta[i] * rho[i] / total).collect();
    Ok(StationaryWeights { eta, rho: rho.iter().copied().collect(), q })
}

/// Grid for the stationary integrals: same step, horizon where every sojourn
/// survival is below `tol`.
pub fn stationary_grid(env: &Environment, step: f64, tol: f64, cap: f64) -> Result<Grid> {
    let horizon = env.sojourn_tail_horizon(tol);
    if horizon > cap {
        return Err(Error::Truncation(format!(
            "sojourn survival stays above {tol} until t = {horizon:.3}, beyond the cap {cap}"
        )));
    }
    Ok(Grid::with_steps(step, 1).extended_to(horizon.max(step)))
}

#[derive(Debug, Clone)]
pub struct StationaryValue<V> {
    pub value: V,
    /// Truncated mass `sum_i w_i int_T^inf (1 - F_i)`, to be scaled by `sup |Pbar|`.
    pub tail_bound: f64,
}

/// `sum_i (q_i / eta_i) int_0^inf (1 - F_i(u)) Pbar_i(u) du`, truncated at the
/// end of `inc`'s grid. The weights are normalized with the same quadrature
/// (`eta_i` replaced by the trapezoid integral of `1 - F_i`), so a constant
/// base of one yields exactly one.
pub fn catastrophe_stationary<V: Mixable>(
    inc: &KernelIncrements,
    weights: &StationaryWeights,
    base: &[Vec<V>],
) -> StationaryValue<V> {
    let h = inc.grid.step();
    let n = inc.grid.steps();
    let s = inc.states;
    let mut eta_num = vec![0.0; s];
    let mut integrals = Vec::with_capacity(s);
    for i in 0..s {
        let mut acc = base[i][0].zero_like();
        for k in 1..=n {
            acc.axpy(0.5 * h * inc.survival(i, k - 1), &base[i][k - 1]);
            acc.axpy(0.5 * h * inc.survival_left(i, k), &base[i][k]);
            eta_num[i] += 0.5 * h * (inc.survival(i, k - 1) + inc.survival_left(i, k));
        }
        integrals.push(acc);
    }
    let norm: f64 = (0..s).map(|i| weights.rho[i] * eta_num[i]).sum();
    let mut value = base[0][0].zero_like();
    let mut tail_bound = 0.0;
    for i in 0..s {
        let w = weights.rho[i] / norm;
        value.axpy(w, &integrals[i]);
        tail_bound += w * (weights.eta[i] - eta_num[i]).abs();
    }
    StationaryValue { value, tail_bound }
}

/// Exponential rates `v_i` of an environment whose sojourns are all exponential.
pub fn exponential_rates(env: &Environment) -> Result<Vec<f64>> {
    (0..env.state_count())
        .map(|i| {
            env.exponential_rate(i)
                .ok_or_else(|| Error::NotExponential(format!("state {i} has a non-exponential sojourn")))
        })
        .collect()
}

/// `int_0^T e^{-s u} f(u) du` by the trapezoid rule on the grid.
pub fn laplace_transform<V: Mixable>(grid: &Grid, path: &[V], s: f64) -> V {
    let h = grid.step();
    let mut acc = path[0].zero_like();
    for k in 1..path.len().min(grid.steps() + 1) {
        acc.axpy(0.5 * h * (-s * grid.time(k - 1)).exp(), &path[k - 1]);
        acc.axpy(0.5 * h * (-s * grid.time(k)).exp(), &path[k]);
    }
    acc
}

/// Stationary transform for exponential sojourns:
/// `sum_i q_i v_i Phat_i(v_i)` with `Phat_i(v_i)` the Laplace transform of the
/// base of state `i` at its own rate.
pub fn exponential_sojourn_stationary<V: Mixable>(env: &Environment, weights: &StationaryWeights, base_laplace: &[V]) -> Result<V> {
    let v = exponential_rates(env)?;
    let mut acc = base_laplace[0].zero_like();
    for i in 0..v.len() {
        acc.axpy(weights.q[i] * v[i], &base_laplace[i]);
    }
    Ok(acc)
}

/// Laplace transform in `t` of the transient catastrophe transform for
/// exponential sojourns:
/// `Lhat_i(s) = Phat_i(s + v_i) + sum_j h_ij(s) Phat_j(s + v_j)`, where
/// `h(s) = Qt(s) (I - Qt(s))^{-1}` and `Qt_ij(s) = p_ij v_i / (s + v_i)`.
///
/// `shifted_laplace[j]` must hold `Phat_j(s + v_j)`.
pub fn exponential_sojourn_laplace<V: Mixable>(env: &Environment, s: f64, shifted_laplace: &[V]) -> Result<Vec<V>> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("Laplace argument must be positive, got {s}")));
    }
    let v = exponential_rates(env)?;
    let n = v.len();
    let p = env.transition_matrix();
    let qt = RMatrix::from_fn(n, n, |i, j| p[(i, j)] * v[i] / (s + v[i]));
    let inv = (RMatrix::identity(n, n) - &qt)
        .try_inverse()
        .ok_or_else(|| Error::Singular("I - Q(s)".into()))?;
    let h = &qt * inv;
    Ok((0..n)
        .map(|i| {
            let mut acc = shifted_laplace[i].clone();
            for j in 0..n {
                acc.axpy(h[(i, j)], &shifted_laplace[j]);
            }
            acc
        })
        .collect())
}
