//! Uniform time grid `0, step, 2 step, ..., horizon` and grid-sampled matrix functions.

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

const NODE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    step: f64,
    steps: usize,
}

impl Grid {
    /// Fails unless `step > 0`, `horizon >= 0` and `horizon / step` is an integer.
    pub fn new(horizon: f64, step: f64) -> Result<Grid> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Grid(format!("step must be positive, got {step}")));
        }
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::Grid(format!("horizon must be nonnegative, got {horizon}")));
        }
        let ratio = horizon / step;
        let steps = ratio.round();
        if (ratio - steps).abs() > NODE_TOLERANCE * ratio.max(1.0) {
            return Err(Error::Grid(format!(
                "horizon {horizon} is not an integer multiple of step {step}"
            )));
        }
        Ok(Grid { step, steps: steps as usize })
    }

    pub fn with_steps(step: f64, steps: usize) -> Grid {
        assert!(step > 0.0);
        Grid { step, steps }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of panels; the grid has `steps + 1` nodes.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.steps)
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    /// Index of the node at `t`, or `GridError` when `t` is not a node.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        match self.node_near(t) {
            Some(k) if k <= self.steps => Ok(k),
            Some(_) => Err(Error::Grid(format!("t = {t} lies beyond the horizon {}", self.horizon()))),
            None => Err(Error::Grid(format!("t = {t} is not a multiple of the step {}", self.step))),
        }
    }

    fn node_near(&self, t: f64) -> Option<usize> {
        if t < -NODE_TOLERANCE {
            return None;
        }
        let ratio = t / self.step;
        let k = ratio.round();
        ((ratio - k).abs() <= NODE_TOLERANCE * ratio.abs().max(1.0)).then_some(k as usize)
    }

    /// True when `t` is a node of the (unbounded) lattice `k * step`.
    pub fn is_lattice_point(&self, t: f64) -> bool {
        self.node_near(t).is_some()
    }

    /// Requires a jump epoch inside the horizon to sit on a node.
    pub fn check_atom(&self, atom: f64, context: &str) -> Result<()> {
        if atom <= self.horizon() + NODE_TOLERANCE && !self.is_lattice_point(atom) {
            return Err(Error::Grid(format!(
                "{context}: jump at {atom} is not a grid node (step {})",
                self.step
            )));
        }
        Ok(())
    }

    /// Same step, horizon rounded up to the first node at or beyond `horizon`.
    pub fn extended_to(&self, horizon: f64) -> Grid {
        let steps = (horizon / self.step - NODE_TOLERANCE).ceil().max(0.0) as usize;
        Grid { step: self.step, steps }
    }
}

/// Matrix-valued function sampled at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMatrixFunction {
    pub grid: Grid,
    pub values: Vec<CMatrix>,
}

impl GridMatrixFunction {
    pub fn at(&self, t: f64) -> Result<&CMatrix> {
        Ok(&self.values[self.grid.index_of(t)?])
    }

    pub fn last(&self) -> &CMatrix {
        self.values.last().expect("grid functions have at least one node")
    }

    /// `theta * F(t) * e` at every node.
    pub fn scalar_path(&self, theta: &[f64]) -> Vec<num_complex::Complex64> {
        self.values
            .iter()
            .map(|m| {
                let mut acc = num_complex::Complex64::new(0.0, 0.0);
                for (a, &w) in theta.iter().enumerate() {
                    if w != 0.0 {
                        acc += m.row(a).iter().sum::<num_complex::Complex64>() * w;
                    }
                }
                acc
            })
            .collect()
    }
}
