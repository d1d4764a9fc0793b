//! Batch-Poisson arrivals: every environment state has `D0 = -alpha_i I` and
//! `D_h = alpha_i p_i(h) I`. The matrix transform collapses to the scalar
//! `exp(-alpha_i int_0^t (1 - D_i(u)) du)`, where `D_i(u)` is the batch-size
//! PGF evaluated at the per-type brackets.

use num_complex::Complex64;

use crate::analysis::Analyzer;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::measures::{stationary_kpis_with_rates, StationaryKpis};
use crate::model::{MmapState, ValidatedModel};
use crate::renewal::{catastrophe_stationary, catastrophe_transient, mix_initial, KernelIncrements};
use crate::transient::{initial_customers_factor, Method, TransformPoint};

const DEGENERATE_TOLERANCE: f64 = 1e-12;

/// Rate and batch-label law of one environment state.
#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateForm {
    pub alpha: f64,
    pub labels: Vec<Vec<u32>>,
    pub probs: Vec<f64>,
}

impl DegenerateForm {
    /// `lambda_r = alpha sum_n n_r p(n)`.
    pub fn type_rates(&self) -> Vec<f64> {
        let k = self.labels.first().map_or(0, |l| l.len());
        (0..k)
            .map(|r| self.alpha * self.labels.iter().zip(&self.probs).map(|(l, p)| l[r] as f64 * p).sum::<f64>())
            .collect()
    }
}

fn scalar_multiple_of_identity(m: &crate::linalg::RMatrix) -> Option<f64> {
    let c = m[(0, 0)];
    let n = m.nrows();
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { c } else { 0.0 };
            if (m[(i, j)] - want).abs() > DEGENERATE_TOLERANCE * (1.0 + c.abs()) {
                return None;
            }
        }
    }
    Some(c)
}

/// Reads `alpha` and `p(h)` off a state, or `NotDegenerate`.
pub fn degenerate_form(state: &MmapState) -> Result<DegenerateForm> {
    let not = |why: &str| Error::NotDegenerate(why.to_string());
    let alpha = -scalar_multiple_of_identity(&state.d0).ok_or_else(|| not("D0 is not a multiple of the identity"))?;
    if alpha <= 0.0 {
        return Err(not("D0 has no outflow"));
    }
    let mut labels = Vec::with_capacity(state.batches.len());
    let mut probs = Vec::with_capacity(state.batches.len());
    for b in &state.batches {
        let c = scalar_multiple_of_identity(&b.matrix)
            .ok_or_else(|| Error::NotDegenerate(format!("D{:?} is not a multiple of the identity", b.label)))?;
        labels.push(b.label.clone());
        probs.push(c / alpha);
    }
    Ok(DegenerateForm { alpha, labels, probs })
}

pub fn degenerate_forms(model: &ValidatedModel) -> Result<Vec<DegenerateForm>> {
    (0..model.state_count()).map(|i| degenerate_form(model.mmap(i))).collect()
}

/// `sum_h p(h) prod_r [z2_r G_r B_r(u) + z1_r F_r (1 - B_r(u))]^{h_r}`.
fn batch_pgf(model: &ValidatedModel, i: usize, form: &DegenerateForm, pt: &TransformPoint, u: f64, left: bool) -> Complex64 {
    let res = model.resources();
    form.labels
        .iter()
        .zip(&form.probs)
        .map(|(label, &p)| {
            label.iter().enumerate().filter(|(_, &h)| h > 0).fold(Complex64::new(p, 0.0), |acc, (r, &h)| {
                let law = res.service_law(r, i);
                let b = if left { law.cdf_left(u) } else { law.cdf(u) };
                let served = pt.z2[r] * res.departure_lst(r, &pt.s2) * b;
                let waiting = pt.z1[r] * res.arrival_lst(r, &pt.s1) * (1.0 - b);
                acc * (served + waiting).powu(h)
            })
        })
        .sum()
}

/// `P(pt, t_k, i)` at every node, the exponent integrated by the trapezoid
/// rule (right limit at the panel start, left limit at its end).
pub fn mgi_base(model: &ValidatedModel, i: usize, form: &DegenerateForm, pt: &TransformPoint, grid: &Grid) -> Result<Vec<Complex64>> {
    for r in 0..model.types() {
        if let Some(a) = model.resources().service_law(r, i).atom() {
            grid.check_atom(a, "service law")?;
        }
    }
    let h = grid.step();
    let one = Complex64::new(1.0, 0.0);
    let mut exponent = Complex64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(grid.steps() + 1);
    out.push(one);
    for k in 0..grid.steps() {
        let t0 = grid.time(k);
        let start = one - batch_pgf(model, i, form, pt, t0, false);
        let end = one - batch_pgf(model, i, form, pt, grid.time(k + 1), true);
        exponent += (start + end) * (0.5 * h);
        out.push((-form.alpha * exponent).exp());
    }
    Ok(out)
}

/// Transient (on the model grid) and stationary transform of the batch-Poisson model.
#[derive(Debug, Clone)]
pub struct MgiTransform {
    pub grid: Grid,
    pub per_state: Vec<Vec<Complex64>>,
    pub mixed: Vec<Complex64>,
    pub stationary: Complex64,
}

pub fn mgi_special_case(model: &ValidatedModel, pt: &TransformPoint) -> Result<MgiTransform> {
    pt.check(model.types(), model.components())?;
    let forms = degenerate_forms(model)?;
    let env = model.environment();
    let grid = *model.grid();
    let bases = |g: &Grid| -> Result<Vec<Vec<Complex64>>> {
        forms.iter().enumerate().map(|(i, f)| mgi_base(model, i, f, pt, g)).collect()
    };

    let base = bases(&grid)?;
    let h0 = model.initial_customers();
    let first: Option<Vec<Vec<Complex64>>> = h0.iter().any(|&h| h > 0).then(|| {
        base.iter()
            .enumerate()
            .map(|(i, path)| {
                path.iter()
                    .enumerate()
                    .map(|(k, v)| v * initial_customers_factor(model, i, pt, grid.time(k), h0))
                    .collect()
            })
            .collect()
    });
    let inc = KernelIncrements::new(env, &grid)?;
    let per_state = catastrophe_transient(&inc, &base, first.as_deref())?;
    let mixed = mix_initial(env.initial(), &per_state);

    let analyzer = Analyzer::new(model, Method::Ode)?;
    let sgrid = analyzer.stationary_grid()?;
    let sbase = bases(&sgrid)?;
    let stationary = if env.is_static() {
        *sbase[0].last().expect("nonempty path")
    } else {
        let sinc = KernelIncrements::new(env, &sgrid)?;
        catastrophe_stationary(&sinc, analyzer.weights(), &sbase).value
    };
    Ok(MgiTransform { grid, per_state, mixed, stationary })
}

/// Stationary means with `lambda_ir = alpha_i sum_n n_r p_i(n)`.
pub fn mgi_kpis(model: &ValidatedModel) -> Result<StationaryKpis> {
    let rates: Vec<Vec<f64>> = degenerate_forms(model)?.iter().map(DegenerateForm::type_rates).collect();
    stationary_kpis_with_rates(model, &rates)
}
