//! Block coordinate descent over `Z_b`, `V`, `U`, `W` and the pace weights.
//!
//! Each outer iteration runs a fixed number of projected line-search steps
//! on every `Z_b`, then `V`, `U` and `W`, re-solves the pace weights from
//! the current regression losses and finally anneals `λ` and `γ`.

mod grad;
mod line_search;

use std::io::Write;

use crate::data::MultiLabelDataset;
use crate::error::{Error, Result};
use crate::model::{self, HyperParams, ModelState, ObjectiveTerms, PaceState, Problem};
use crate::partition::GroupPartition;
use crate::selfpaced;
use crate::Matrix;

pub use crate::model::project_unit_rows;
pub use grad::{grad_u, grad_v, grad_w, grad_z};
pub use line_search::{line_search_step, Block, MIN_STEP};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimConfig {
    pub max_outer_iters: usize,
    pub inner_steps_per_block: usize,
    pub armijo_c: f64,
    pub backtrack_ratio: f64,
    pub rel_tol: f64,
    /// Seed for the initialization.
    pub seed: u64,
    /// Keep `P`, `λ` and `γ` at their starting values.
    pub freeze_pace: bool,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 100,
            inner_steps_per_block: 5,
            armijo_c: 1e-4,
            backtrack_ratio: 0.5,
            rel_tol: 1e-5,
            seed: 0,
            freeze_pace: false,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inner_steps_per_block == 0 {
            return Err(Error::config("inner_steps_per_block must be >= 1"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::config(format!("armijo_c = {} must lie in (0, 1)", self.armijo_c)));
        }
        if !(self.backtrack_ratio > 0.0 && self.backtrack_ratio < 1.0) {
            return Err(Error::config(format!(
                "backtrack_ratio = {} must lie in (0, 1)",
                self.backtrack_ratio
            )));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::config(format!("rel_tol = {} must be > 0", self.rel_tol)));
        }
        Ok(())
    }
}

/// Summary of one completed outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Objective after the pace update, before annealing.
    pub objective: f64,
    pub terms: ObjectiveTerms,
    /// `λ` and `γ` in force during the iteration.
    pub lambda: f64,
    pub gamma: f64,
    pub mean_p: f64,
    /// Line-search steps that moved (`step > 0`) and that were rejected.
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Objective at the start and after each block, in update order.
    pub sweep: Vec<f64>,
    /// Relative objective change over the iteration at fixed `(λ, γ)`.
    pub rel_change: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitTrace {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

impl FitTrace {
    pub const CSV_HEADER: &'static str =
        "iter,objective,recon,residual,global_corr,local_corr,pace_l1,pace_l2,reg,lambda,gamma,mean_p";

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for (i, r) in self.records.iter().enumerate() {
            let t = &r.terms;
            writeln!(
                out,
                "{i},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.objective,
                t.recon,
                t.residual,
                t.global_corr,
                t.local_corr,
                t.pace_l1,
                t.pace_l2,
                t.reg,
                r.lambda,
                r.gamma,
                r.mean_p
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub state: ModelState,
    pub pace: PaceState,
    pub trace: FitTrace,
}

/// Pace weights solved from the regression losses of `state`.
pub fn initial_pace(
    problem: &Problem<'_>,
    state: &ModelState,
    lambda: f64,
    gamma: f64,
    mu1: f64,
    mu2: f64,
) -> Result<PaceState> {
    let losses = problem.residual_loss(state);
    let pace = PaceState::new(Matrix::zeros(losses.nrows(), losses.ncols()), lambda, gamma, mu1, mu2)?;
    selfpaced::update_pace(&pace, &losses)
}

/// Initializes from `cfg.seed` and runs [`fit_from`].
pub fn fit(
    ds: &MultiLabelDataset,
    part: &GroupPartition,
    params: &HyperParams,
    pace0: &PaceState,
    cfg: &OptimConfig,
) -> Result<FitOutcome> {
    let problem = Problem::new(ds, part, *params)?;
    let state = model::initialize(ds, params, cfg.seed)?;
    fit_from(&problem, state, pace0.clone(), cfg)
}

/// Runs the outer iterations from an explicit starting point.
pub fn fit_from(
    problem: &Problem<'_>,
    mut state: ModelState,
    mut pace: PaceState,
    cfg: &OptimConfig,
) -> Result<FitOutcome> {
    cfg.validate()?;
    problem.check_state(&state)?;
    problem.check_pace(&pace)?;
    state.check_unit_rows()?;

    let mut blocks: Vec<Block> = (0..problem.n_groups()).map(Block::Z).collect();
    blocks.extend([Block::V, Block::U, Block::W]);

    let mut trace = FitTrace::default();
    for iter in 0..cfg.max_outer_iters {
        let with_context = |e: Error| match e {
            Error::Numerical { block, msg } => Error::Numerical {
                block,
                msg: format!("outer iteration {iter}: {msg}"),
            },
            other => other,
        };

        let start = problem.terms(&state, &pace);
        let mut sweep = vec![start.total()];
        let (mut accepted, mut rejected) = (0, 0);
        for &block in &blocks {
            for _ in 0..cfg.inner_steps_per_block {
                let (next, step) =
                    line_search_step(problem, &state, &pace, block, cfg).map_err(with_context)?;
                if step > 0.0 {
                    accepted += 1;
                } else {
                    rejected += 1;
                }
                state = next;
            }
            sweep.push(problem.terms(&state, &pace).total());
        }

        if !cfg.freeze_pace {
            pace = selfpaced::update_pace(&pace, &problem.residual_loss(&state))?;
        }
        let end = problem.terms(&state, &pace);
        if !cfg.freeze_pace {
            sweep.push(end.total());
        }

        let change = (end.model_fit() - start.model_fit()) + (end.pace() - start.pace());
        let rel_change = change.abs() / start.model_fit().abs().max(f64::EPSILON);
        trace.records.push(IterationRecord {
            objective: end.total(),
            terms: end,
            lambda: pace.lambda,
            gamma: pace.gamma,
            mean_p: pace.mean_weight(),
            accepted_steps: accepted,
            rejected_steps: rejected,
            sweep,
            rel_change,
        });

        if !cfg.freeze_pace {
            pace = selfpaced::anneal(&pace);
        }
        if rel_change < cfg.rel_tol {
            trace.converged = true;
            break;
        }
    }
    Ok(FitOutcome { state, pace, trace })
}

/// Writes a `k×n` weight matrix as CSV rows.
pub fn write_weights_csv<W: Write>(p: &Matrix, mut out: W) -> Result<()> {
    for row in p.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}
