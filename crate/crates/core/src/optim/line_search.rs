use std::fmt;

use super::grad::{grad_u, grad_v, grad_w, grad_z};
use super::OptimConfig;
use crate::error::{Error, Result};
use crate::model::{project_unit_rows, ModelState, PaceState, Problem};
use crate::Matrix;

/// Smallest trial step before a line search gives up.
pub const MIN_STEP: f64 = 1e-12;

/// One block of the coordinate descent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Z(usize),
    V,
    U,
    W,
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Block::Z(b) => write!(f, "Z{b}"),
            Block::V => f.write_str("V"),
            Block::U => f.write_str("U"),
            Block::W => f.write_str("W"),
        }
    }
}

impl Block {
    fn numerical(self, msg: impl Into<String>) -> Error {
        Error::Numerical {
            block: self.to_string(),
            msg: msg.into(),
        }
    }

    fn gradient(self, problem: &Problem<'_>, state: &ModelState, pace: &PaceState) -> Result<Matrix> {
        match self {
            Block::Z(b) => grad_z(problem, state, b),
            Block::V => grad_v(problem, state, pace),
            Block::U => grad_u(problem, state),
            Block::W => grad_w(problem, state, pace),
        }
    }

    fn slot(self, state: &mut ModelState) -> &mut Matrix {
        match self {
            Block::Z(b) => &mut state.z[b],
            Block::V => &mut state.v,
            Block::U => &mut state.u,
            Block::W => &mut state.w,
        }
    }
}

/// One backtracking step on `block`.
///
/// Starting from step 1 the step shrinks by `backtrack_ratio` until
/// `f(new) ≤ f(old) − armijo_c · step · ‖∇‖²`, with `Z` blocks projected
/// back to unit rows before evaluation. Only the terms that depend on the
/// factors are compared; the pace terms are constant here. Returns the
/// accepted state and step, or the unchanged state and step 0.
pub fn line_search_step(
    problem: &Problem<'_>,
    state: &ModelState,
    pace: &PaceState,
    block: Block,
    cfg: &OptimConfig,
) -> Result<(ModelState, f64)> {
    if let Block::Z(b) = block {
        if b >= problem.n_groups() {
            return Err(Error::Range(format!("no group {b}")));
        }
    }
    let f0 = problem.terms(state, pace).model_fit();
    if !f0.is_finite() {
        return Err(block.numerical(format!("objective is {f0}")));
    }
    let grad = block.gradient(problem, state, pace)?;
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(block.numerical("gradient is not finite"));
    }
    let grad_sq = grad.norm_squared();
    if grad_sq == 0.0 {
        return Ok((state.clone(), 1.0));
    }

    let mut step = 1.0;
    while step >= MIN_STEP {
        let mut trial = state.clone();
        let slot = block.slot(&mut trial);
        *slot -= &grad * step;
        if matches!(block, Block::Z(_)) {
            *slot = project_unit_rows(slot);
        }
        let f = problem.terms(&trial, pace).model_fit();
        // a non-finite trial is an overshoot, not a failure
        if f.is_finite() && f <= f0 - cfg.armijo_c * step * grad_sq {
            return Ok((trial, step));
        }
        step *= cfg.backtrack_ratio;
    }
    Ok((state.clone(), 0.0))
}
