//! Model configuration: marked MAP arrivals per environment state, the
//! semi-Markov environment, per-type service laws and resource laws.
//!
//! [`ModelConfig`] is the plain serializable form (what a model file holds);
//! [`ValidatedModel`] is built by [`validate_model`] and carries the matrices
//! and derived constants used by the analysis and the simulator. Indices for
//! states, phases, types and resource components are zero-based.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::DistributionSpec;
use crate::error::{Error, Result, Violation, Violations};
use crate::grid::Grid;
use crate::linalg::{is_irreducible, stationary_of_generator, RMatrix};

pub const GENERATOR_TOLERANCE: f64 = 1e-10;
pub const KERNEL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSpec {
    pub label: Vec<u32>,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmapBlockSpec {
    #[serde(rename = "D0")]
    pub d0: Vec<Vec<f64>>,
    pub batches: Vec<BatchSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmapSpec {
    pub phases: usize,
    pub types: usize,
    /// One block of characteristic matrices per environment state.
    pub states: Vec<MmapBlockSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelEntry {
    pub from: usize,
    pub to: usize,
    pub prob: f64,
    pub dist: DistributionSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub states: usize,
    pub initial: Vec<f64>,
    /// `Q_ij(t) = prob * dist.cdf(t)`. A single-state environment with an
    /// empty kernel never changes state (no catastrophes).
    pub kernel: Vec<KernelEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceSpec {
    /// `arrival[r][c]`: law of component `c` of the resource brought by a type-`r` customer.
    pub arrival: Vec<Vec<DistributionSpec>>,
    /// `departure[r][c]`: law of component `c` of the resource released at a type-`r` departure.
    pub departure: Vec<Vec<DistributionSpec>>,
}

fn default_tail_tolerance() -> f64 {
    1e-10
}

fn default_max_stationary_horizon() -> f64 {
    5000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericSpec {
    pub horizon: f64,
    pub step: f64,
    #[serde(default = "default_tail_tolerance")]
    pub tail_tolerance: f64,
    #[serde(default = "default_max_stationary_horizon")]
    pub max_stationary_horizon: f64,
}

impl NumericSpec {
    pub fn new(horizon: f64, step: f64) -> Self {
        NumericSpec {
            horizon,
            step,
            tail_tolerance: default_tail_tolerance(),
            max_stationary_horizon: default_max_stationary_horizon(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub initial_customers: Vec<u32>,
    /// `service[r][i]`: service-time law of type `r` in environment state `i`.
    pub service: Vec<Vec<DistributionSpec>>,
    pub mmap: MmapSpec,
    pub environment: EnvironmentSpec,
    pub resources: ResourceSpec,
    pub numeric: NumericSpec,
}

/// A batch label with its rate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub label: Vec<u32>,
    pub matrix: RMatrix,
}

impl Batch {
    pub fn size(&self) -> u32 {
        self.label.iter().sum()
    }
}

/// Characteristic matrices `{D0, D_h}` of one environment state.
#[derive(Debug, Clone, PartialEq)]
pub struct MmapState {
    pub d0: RMatrix,
    pub batches: Vec<Batch>,
}

impl MmapState {
    pub fn new(d0: RMatrix, batches: Vec<Batch>) -> Self {
        MmapState { d0, batches }
    }

    pub fn phases(&self) -> usize {
        self.d0.nrows()
    }

    pub fn types(&self) -> usize {
        self.batches.first().map_or(0, |b| b.label.len())
    }

    /// `D = D0 + sum_h D_h`.
    pub fn generator(&self) -> RMatrix {
        let mut d = self.d0.clone();
        for b in &self.batches {
            d += &b.matrix;
        }
        d
    }

    pub fn batch_index(&self, label: &[u32]) -> Option<usize> {
        self.batches.iter().position(|b| b.label == label)
    }
}

/// Validated semi-Markov environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    initial: Vec<f64>,
    /// Outgoing entries `(to, p_ij, DF_ij)` per state.
    rows: Vec<Vec<(usize, f64, DistributionSpec)>>,
}

impl Environment {
    pub fn state_count(&self) -> usize {
        self.initial.len()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transitions(&self, i: usize) -> &[(usize, f64, DistributionSpec)] {
        &self.rows[i]
    }

    /// True for a single state that is never left.
    pub fn is_static(&self) -> bool {
        self.rows.iter().all(|r| r.is_empty())
    }

    pub fn transition_matrix(&self) -> RMatrix {
        let n = self.state_count();
        let mut p = RMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for (j, prob, _) in row {
                p[(i, *j)] += prob;
            }
        }
        p
    }

    /// `Q_ij(t)`, right-continuous.
    pub fn kernel_cdf(&self, i: usize, j: usize, t: f64) -> f64 {
        self.rows[i]
            .iter()
            .filter(|(to, _, _)| *to == j)
            .map(|(_, p, d)| p * d.cdf(t))
            .sum()
    }

    /// `F_i(t) = sum_j Q_ij(t)`.
    pub fn sojourn_cdf(&self, i: usize, t: f64) -> f64 {
        self.rows[i].iter().map(|(_, p, d)| p * d.cdf(t)).sum()
    }

    /// `1 - F_i(t)`, right-continuous.
    pub fn sojourn_survival(&self, i: usize, t: f64) -> f64 {
        1.0 - self.sojourn_cdf(i, t)
    }

    /// `1 - F_i(t-)`.
    pub fn sojourn_survival_left(&self, i: usize, t: f64) -> f64 {
        1.0 - self.rows[i].iter().map(|(_, p, d)| p * d.cdf_left(t)).sum::<f64>()
    }

    /// Mean sojourn `eta_i`; infinite for a static environment.
    pub fn mean_sojourn(&self, i: usize) -> f64 {
        if self.rows[i].is_empty() {
            return f64::INFINITY;
        }
        self.rows[i].iter().map(|(_, p, d)| p * d.mean()).sum()
    }

    /// Point beyond which every sojourn survival is below `tol`.
    pub fn sojourn_tail_horizon(&self, tol: f64) -> f64 {
        self.rows
            .iter()
            .flatten()
            .map(|(_, p, d)| d.tail_quantile(tol / p.max(tol)))
            .fold(0.0, f64::max)
    }

    /// Picks the next state and the sojourn length for a stay in `i`.
    pub fn sample_transition<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> Option<(usize, f64)> {
        let row = &self.rows[i];
        if row.is_empty() {
            return None;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = row.len() - 1;
        for (k, (_, p, _)) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                pick = k;
                break;
            }
        }
        let (to, _, dist) = &row[pick];
        Some((*to, dist.sample(rng)))
    }

    /// Exponential rate `v_i` when every outgoing law of `i` is exponential with one common rate.
    pub fn exponential_rate(&self, i: usize) -> Option<f64> {
        let mut rate = None;
        for (_, _, d) in &self.rows[i] {
            match d {
                DistributionSpec::Exponential { rate: r } => match rate {
                    None => rate = Some(*r),
                    Some(prev) if (prev - r).abs() <= 1e-12 * prev => {}
                    _ => return None,
                },
                _ => return None,
            }
        }
        rate
    }

    pub fn from_spec(spec: &EnvironmentSpec) -> Result<Environment> {
        let mut violations = Vec::new();
        let env = build_environment(spec, &mut violations);
        if violations.is_empty() {
            Ok(env)
        } else {
            Err(Error::Invalid(Violations(violations)))
        }
    }
}

/// Per-type service laws and resource-vector laws.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceResources {
    pub service: Vec<Vec<DistributionSpec>>,
    pub arrival: Vec<Vec<DistributionSpec>>,
    pub departure: Vec<Vec<DistributionSpec>>,
}

impl ServiceResources {
    pub fn service_law(&self, r: usize, i: usize) -> &DistributionSpec {
        &self.service[r][i]
    }

    pub fn components(&self) -> usize {
        self.arrival.first().map_or(0, |v| v.len())
    }

    /// `E[exp(-s . zeta_r)]`, components independent.
    pub fn arrival_lst(&self, r: usize, s: &[f64]) -> f64 {
        self.arrival[r].iter().zip(s).map(|(d, &x)| d.lst(x)).product()
    }

    /// `E[exp(-s . sigma_r)]`, components independent.
    pub fn departure_lst(&self, r: usize, s: &[f64]) -> f64 {
        self.departure[r].iter().zip(s).map(|(d, &x)| d.lst(x)).product()
    }

    pub fn arrival_mean(&self, r: usize, c: usize) -> f64 {
        self.arrival[r][c].mean()
    }
}

/// A model that passed every structural check, with derived constants.
#[derive(Debug, Clone)]
pub struct ValidatedModel {
    config: ModelConfig,
    mmap: Vec<MmapState>,
    environment: Environment,
    resources: ServiceResources,
    generators: Vec<RMatrix>,
    phase_stationary: Vec<Option<DVector<f64>>>,
    grid: Grid,
}

impl ValidatedModel {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn types(&self) -> usize {
        self.config.mmap.types
    }

    pub fn phases(&self) -> usize {
        self.config.mmap.phases
    }

    pub fn state_count(&self) -> usize {
        self.environment.state_count()
    }

    pub fn components(&self) -> usize {
        self.resources.components()
    }

    pub fn mmap(&self, i: usize) -> &MmapState {
        &self.mmap[i]
    }

    pub fn environment(&self) -> &Environment {
        &self.environment
    }

    pub fn resources(&self) -> &ServiceResources {
        &self.resources
    }

    pub fn initial_customers(&self) -> &[u32] {
        &self.config.initial_customers
    }

    /// `D(i) = D0(i) + sum_h D_h(i)`.
    pub fn generator(&self, i: usize) -> &RMatrix {
        &self.generators[i]
    }

    /// Stationary phase law of `D(i)`; `Reducible` when `D(i)` has several classes.
    pub fn phase_stationary(&self, i: usize) -> Result<&DVector<f64>> {
        self.phase_stationary[i]
            .as_ref()
            .ok_or_else(|| Error::Reducible(format!("D({i}) is not irreducible")))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn tail_tolerance(&self) -> f64 {
        self.config.numeric.tail_tolerance
    }

    pub fn max_stationary_horizon(&self) -> f64 {
        self.config.numeric.max_stationary_horizon
    }

    /// Same model on a different numeric grid.
    pub fn with_grid(&self, grid: Grid) -> ValidatedModel {
        let mut m = self.clone();
        m.config.numeric.horizon = grid.horizon();
        m.config.numeric.step = grid.step();
        m.grid = grid;
        m
    }
}

fn matrix_from_rows(
    rows: &[Vec<f64>],
    n: usize,
    context: &str,
    violations: &mut Vec<Violation>,
) -> Option<RMatrix> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        violations.push(Violation::IndexError {
            context: context.to_string(),
            reason: format!("expected a {n}x{n} matrix"),
        });
        return None;
    }
    Some(RMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn check_dist(d: &DistributionSpec, context: String, violations: &mut Vec<Violation>) {
    if let Err(reason) = d.validate() {
        violations.push(Violation::BadDistribution { context, reason });
    }
}

fn build_environment(spec: &EnvironmentSpec, violations: &mut Vec<Violation>) -> Environment {
    let n = spec.states;
    if n == 0 {
        violations.push(Violation::IndexError {
            context: "environment.states".into(),
            reason: "need at least one state".into(),
        });
    }
    if spec.initial.len() != n {
        violations.push(Violation::IndexError {
            context: "environment.initial".into(),
            reason: format!("length {} but {} states", spec.initial.len(), n),
        });
    } else {
        let total: f64 = spec.initial.iter().sum();
        if spec.initial.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > KERNEL_TOLERANCE {
            violations.push(Violation::Numeric {
                reason: format!("environment.initial is not a probability vector (sum {total})"),
            });
        }
    }
    let mut rows: Vec<Vec<(usize, f64, DistributionSpec)>> = vec![Vec::new(); n];
    for (k, e) in spec.kernel.iter().enumerate() {
        let context = format!("environment.kernel[{k}]");
        if e.from >= n || e.to >= n {
            violations.push(Violation::IndexError {
                context,
                reason: format!("transition {}->{} outside 0..{}", e.from, e.to, n),
            });
            continue;
        }
        if !(e.prob > 0.0 && e.prob <= 1.0 + KERNEL_TOLERANCE) {
            violations.push(Violation::Numeric {
                reason: format!("{context}: prob must lie in (0, 1], got {}", e.prob),
            });
        }
        if rows[e.from].iter().any(|(to, _, _)| *to == e.to) {
            violations.push(Violation::IndexError {
                context,
                reason: format!("duplicate entry {}->{}", e.from, e.to),
            });
            continue;
        }
        check_dist(&e.dist, context, violations);
        rows[e.from].push((e.to, e.prob, e.dist.clone()));
    }
    let is_static = n == 1 && spec.kernel.is_empty();
    if !is_static {
        for (i, row) in rows.iter().enumerate() {
            let total: f64 = row.iter().map(|(_, p, _)| p).sum();
            if (total - 1.0).abs() > KERNEL_TOLERANCE {
                violations.push(Violation::ImproperKernel { state: i, row_sum: total });
            }
        }
    }
    Environment { initial: spec.initial.clone(), rows }
}

/// Checks every structural constraint and returns the model with its derived
/// constants, or the complete list of violations.
pub fn validate_model(config: &ModelConfig) -> Result<ValidatedModel> {
    let mut violations = Vec::new();
    let m = config.mmap.phases;
    let k_types = config.mmap.types;
    if m == 0 {
        violations.push(Violation::IndexError {
            context: "mmap.phases".into(),
            reason: "need at least one phase".into(),
        });
    }
    if k_types == 0 {
        violations.push(Violation::IndexError {
            context: "mmap.types".into(),
            reason: "need at least one customer type".into(),
        });
    }
    let environment = build_environment(&config.environment, &mut violations);
    let n_states = config.environment.states;
    if config.mmap.states.len() != n_states {
        violations.push(Violation::IndexError {
            context: "mmap.states".into(),
            reason: format!(
                "{} blocks but the environment has {} states",
                config.mmap.states.len(),
                n_states
            ),
        });
    }

    let mut mmap = Vec::new();
    for (i, block) in config.mmap.states.iter().enumerate() {
        let Some(d0) = matrix_from_rows(&block.d0, m, &format!("mmap.states[{i}].D0"), &mut violations) else {
            continue;
        };
        for a in 0..m {
            for b in 0..m {
                let x = d0[(a, b)];
                if (a == b && !(x < 0.0)) || (a != b && !(x >= 0.0)) || !x.is_finite() {
                    violations.push(Violation::Numeric {
                        reason: format!(
                            "mmap.states[{i}].D0[{a}][{b}] = {x}: diagonal must be negative, off-diagonal nonnegative"
                        ),
                    });
                }
            }
        }
        let mut batches: Vec<Batch> = Vec::new();
        for (h, batch) in block.batches.iter().enumerate() {
            let context = format!("mmap.states[{i}].batches[{h}]");
            if batch.label.len() != k_types {
                violations.push(Violation::IndexError {
                    context: context.clone(),
                    reason: format!("label has {} entries, expected {}", batch.label.len(), k_types),
                });
                continue;
            }
            if batch.label.iter().all(|&x| x == 0) {
                violations.push(Violation::IndexError {
                    context: context.clone(),
                    reason: "batch label must contain at least one customer".into(),
                });
                continue;
            }
            if batches.iter().any(|b| b.label == batch.label) {
                violations.push(Violation::IndexError {
                    context: context.clone(),
                    reason: format!("duplicate label {:?}", batch.label),
                });
                continue;
            }
            let Some(mat) = matrix_from_rows(&batch.matrix, m, &context, &mut violations) else {
                continue;
            };
            if mat.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                violations.push(Violation::Numeric {
                    reason: format!("{context}: rates must be nonnegative"),
                });
            }
            batches.push(Batch { label: batch.label.clone(), matrix: mat });
        }
        let state = MmapState { d0, batches };
        let d = state.generator();
        for row in 0..m {
            let sum: f64 = d.row(row).iter().sum();
            if sum.abs() > GENERATOR_TOLERANCE {
                violations.push(Violation::NonGenerator { state: i, row, row_sum: sum });
            }
        }
        mmap.push(state);
    }

    if config.service.len() != k_types || config.service.iter().any(|v| v.len() != n_states) {
        violations.push(Violation::IndexError {
            context: "service".into(),
            reason: format!("expected {k_types} types x {n_states} states"),
        });
    }
    for (r, per_state) in config.service.iter().enumerate() {
        for (i, d) in per_state.iter().enumerate() {
            check_dist(d, format!("service[{r}][{i}]"), &mut violations);
        }
    }
    let res = &config.resources;
    let k_comp = res.arrival.first().map_or(0, |v| v.len());
    for (name, laws) in [("arrival", &res.arrival), ("departure", &res.departure)] {
        if laws.len() != k_types || laws.iter().any(|v| v.len() != k_comp) {
            violations.push(Violation::IndexError {
                context: format!("resources.{name}"),
                reason: format!("expected {k_types} types x {k_comp} components"),
            });
        }
        for (r, comps) in laws.iter().enumerate() {
            for (c, d) in comps.iter().enumerate() {
                check_dist(d, format!("resources.{name}[{r}][{c}]"), &mut violations);
            }
        }
    }
    if config.initial_customers.len() != k_types {
        violations.push(Violation::IndexError {
            context: "initial_customers".into(),
            reason: format!("length {} but {} types", config.initial_customers.len(), k_types),
        });
    }

    let numeric = &config.numeric;
    let grid = match Grid::new(numeric.horizon, numeric.step) {
        Ok(g) => Some(g),
        Err(e) => {
            violations.push(Violation::Numeric { reason: e.to_string() });
            None
        }
    };
    if !(numeric.tail_tolerance > 0.0 && numeric.tail_tolerance < 1.0) {
        violations.push(Violation::Numeric {
            reason: "numeric.tail_tolerance must lie in (0, 1)".into(),
        });
    }
    if !(numeric.max_stationary_horizon > 0.0) {
        violations.push(Violation::Numeric {
            reason: "numeric.max_stationary_horizon must be positive".into(),
        });
    }

    if !violations.is_empty() {
        return Err(Error::Invalid(Violations(violations)));
    }
    let generators: Vec<RMatrix> = mmap.iter().map(MmapState::generator).collect();
    let phase_stationary = generators
        .iter()
        .map(|d| if is_irreducible(d) { stationary_of_generator(d).ok() } else { None })
        .collect();
    Ok(ValidatedModel {
        config: config.clone(),
        mmap,
        environment,
        resources: ServiceResources {
            service: config.service.clone(),
            arrival: res.arrival.clone(),
            departure: res.departure.clone(),
        },
        generators,
        phase_stationary,
        grid: grid.expect("grid checked above"),
    })
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn scalar_poisson_is_valid() {
        let cfg = poisson_model(2.0, 1.0, static_env());
        let model = validate_model(&cfg).unwrap();
        assert_eq!(model.generator(0)[(0, 0)], 0.0);
        assert_eq!(model.types(), 1);
        assert_eq!(model.phases(), 1);
    }

    #[test]
    fn non_generator_is_reported() {
        let mut cfg = poisson_model(2.0, 1.0, static_env());
        cfg.mmap.states[0].d0 = vec![vec![-1.0]];
        let err = validate_model(&cfg).unwrap_err();
        let Error::Invalid(Violations(list)) = err else { panic!() };
        assert!(list.iter().any(|v| matches!(v, Violation::NonGenerator { row_sum, .. } if (*row_sum - 1.0).abs() < 1e-12)));
    }

    #[test]
    fn improper_kernel_is_reported() {
        let env = EnvironmentSpec {
            states: 2,
            initial: vec![1.0, 0.0],
            kernel: vec![
                KernelEntry { from: 0, to: 1, prob: 0.6, dist: DistributionSpec::exponential(1.0) },
                KernelEntry { from: 0, to: 0, prob: 0.3, dist: DistributionSpec::exponential(1.0) },
                KernelEntry { from: 1, to: 0, prob: 1.0, dist: DistributionSpec::exponential(1.0) },
            ],
        };
        let cfg = poisson_model(1.0, 1.0, env);
        let Error::Invalid(Violations(list)) = validate_model(&cfg).unwrap_err() else { panic!() };
        assert_eq!(list.len(), 1);
        assert!(matches!(list[0], Violation::ImproperKernel { state: 0, row_sum } if (row_sum - 0.9).abs() < 1e-12));
    }

    #[test]
    fn all_violations_are_collected() {
        let mut cfg = poisson_model(1.0, 1.0, exp_env(1.0));
        cfg.mmap.states[0].d0 = vec![vec![-3.0]];
        cfg.service[0][0] = DistributionSpec::Erlang { shape: 2.5, rate: 1.0 };
        cfg.initial_customers = vec![0, 0];
        let Error::Invalid(Violations(list)) = validate_model(&cfg).unwrap_err() else { panic!() };
        assert_eq!(list.len(), 3, "{list:?}");
    }

    #[test]
    fn generator_rows_vanish_for_valid_models() {
        let cfg = poisson_model(3.5, 1.0, exp_env(0.5));
        let model = validate_model(&cfg).unwrap();
        for i in 0..model.state_count() {
            let d = model.generator(i);
            for r in 0..d.nrows() {
                assert!(d.row(r).iter().sum::<f64>().abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn grid_must_divide_horizon() {
        let mut cfg = poisson_model(1.0, 1.0, static_env());
        cfg.numeric = NumericSpec::new(1.0, 0.3);
        assert!(validate_model(&cfg).is_err());
    }
}
