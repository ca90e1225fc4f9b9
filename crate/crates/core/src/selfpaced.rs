//! Pace weights: the per-row self-paced subproblem with a diversity term.
//!
//! For one latent-label row with losses `L_1..L_n` the weights solve
//!
//! ```text
//! min_{p ∈ [0,1]ⁿ}  Σ p_j L_j − λ Σ p_j + γ ‖p‖₂
//! ```
//!
//! With the losses sorted ascending the minimizer has three zones: weight 1
//! on the first `θ₁` entries, weight `c·(λ − L_j)` in between, and weight 0
//! from `θ₂` on. `θ₂` is the first position whose loss reaches `λ`; every
//! loss at or below `λ − γ` is certainly in the unit zone, which bounds
//! `θ₁` from below. For a candidate `θ₁` the scale is
//! `c = sqrt(θ₁ / (γ² − r))` with `r = Σ_{θ₁<j<θ₂} (λ − L_j)²`, and the
//! candidate with the smallest objective wins.
//!
//! With `γ = 0` the rule collapses to the binary `p_j = [L_j < λ]`.

use crate::error::{Error, Result};
use crate::model::PaceState;
use crate::Matrix;

/// One row of the pace subproblem.
#[derive(Debug, Clone, Copy)]
pub struct RowSolveInputs<'a> {
    pub losses: &'a [f64],
    pub lambda: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowSolution {
    /// Weights in the original (unsorted) order.
    pub weights: Vec<f64>,
    /// Number of sorted positions carrying weight one (1-based boundary).
    pub theta1: usize,
    /// First sorted position carrying weight zero, `n + 1` if none.
    pub theta2: usize,
    /// Scale of the intermediate weights; infinite when they all saturate.
    pub scale: f64,
    pub objective_value: f64,
}

impl RowSolution {
    pub fn nonzero_fraction(&self) -> f64 {
        if self.weights.is_empty() {
            return 0.0;
        }
        self.weights.iter().filter(|&&w| w > 0.0).count() as f64 / self.weights.len() as f64
    }
}

/// `Σ p_j L_j − λ Σ p_j + γ ‖p‖₂`
pub fn row_objective(weights: &[f64], losses: &[f64], lambda: f64, gamma: f64) -> f64 {
    let linear: f64 = weights
        .iter()
        .zip(losses)
        .map(|(p, l)| p * (l - lambda))
        .sum();
    let norm = weights.iter().map(|p| p * p).sum::<f64>().sqrt();
    linear + gamma * norm
}

fn validate(inp: &RowSolveInputs<'_>) -> Result<()> {
    if !(inp.lambda > 0.0 && inp.lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda = {} must be > 0", inp.lambda)));
    }
    if !(inp.gamma >= 0.0 && inp.gamma.is_finite()) {
        return Err(Error::Domain(format!("gamma = {} must be >= 0", inp.gamma)));
    }
    if let Some((j, l)) = inp
        .losses
        .iter()
        .enumerate()
        .find(|(_, l)| !(l.is_finite() && **l >= 0.0))
    {
        return Err(Error::Domain(format!("loss {l} at position {j} is not finite and >= 0")));
    }
    Ok(())
}

/// Closed-form minimizer of the row subproblem.
pub fn solve_row(inp: &RowSolveInputs<'_>) -> Result<RowSolution> {
    validate(inp)?;
    let RowSolveInputs {
        losses,
        lambda,
        gamma,
    } = *inp;
    let n = losses.len();

    // stable: equal losses keep their original order
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]));
    let benefit: Vec<f64> = order.iter().map(|&j| lambda - losses[j]).collect();

    // prefix sums over sorted positions, index i covers positions 1..=i
    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for (i, a) in benefit.iter().enumerate() {
        s1[i + 1] = s1[i] + a;
        s2[i + 1] = s2[i] + a * a;
    }

    let theta2 = 1 + order.iter().take_while(|&&j| losses[j] < lambda).count();
    let h_star = order
        .iter()
        .take_while(|&&j| losses[j] <= lambda - gamma)
        .count();
    let last = theta2 - 1;
    let gamma_sq = gamma * gamma;

    let mut best: Option<(f64, usize, f64)> = None;
    for theta1 in h_star.min(last)..=last {
        let r = s2[last] - s2[theta1];
        let s = s1[last] - s1[theta1];
        let scale = if gamma_sq != r {
            if theta1 == 0 {
                0.0
            } else if gamma_sq > r {
                (theta1 as f64 / (gamma_sq - r)).sqrt()
            } else {
                f64::INFINITY
            }
        } else if gamma_sq < s {
            benefit[theta1]
        } else {
            0.0
        };

        let value = candidate_value(&benefit, &s1, &s2, theta1, last, scale, gamma);
        if best.is_none_or(|(v, _, _)| value < v) {
            best = Some((value, theta1, scale));
        }
    }
    let (_, theta1, scale) = best.expect("candidate range is never empty");

    let mut weights = vec![0.0; n];
    for (pos, &j) in order.iter().enumerate() {
        let rank = pos + 1;
        weights[j] = if rank <= theta1 {
            1.0
        } else if rank >= theta2 {
            0.0
        } else {
            saturate(scale, benefit[pos])
        };
    }
    let objective_value = row_objective(&weights, losses, lambda, gamma);
    Ok(RowSolution {
        weights,
        theta1,
        theta2,
        scale,
        objective_value,
    })
}

/// Intermediate weight `c·a` clamped into `[0, 1]`; `a > 0` on the interior.
fn saturate(scale: f64, benefit: f64) -> f64 {
    if scale == f64::INFINITY {
        1.0
    } else {
        (scale * benefit).clamp(0.0, 1.0)
    }
}

/// Objective of the candidate `(θ₁, θ₂)` after clamping its intermediate
/// weights. Clamped weights form a prefix of the interior, so the value
/// reduces to prefix sums.
fn candidate_value(
    benefit: &[f64],
    s1: &[f64],
    s2: &[f64],
    theta1: usize,
    last: usize,
    scale: f64,
    gamma: f64,
) -> f64 {
    let saturated = benefit[theta1..last].partition_point(|&a| saturate(scale, a) >= 1.0);
    let ones = theta1 + saturated;
    let rest = s2[last] - s2[ones];
    if ones == last || scale == 0.0 {
        return -s1[ones] + gamma * (ones as f64).sqrt();
    }
    -s1[ones] - scale * rest + gamma * (ones as f64 + scale * scale * rest).sqrt()
}

/// Brute-force minimizer used to check [`solve_row`]: exhaustive grid search
/// with `grid_steps` points per axis, then projected gradient descent with
/// backtracking from the best grid point.
pub fn oracle_minimize_row(inp: &RowSolveInputs<'_>, grid_steps: usize) -> Result<Vec<f64>> {
    const MAX_EXHAUSTIVE: usize = 8;
    validate(inp)?;
    let n = inp.losses.len();
    if n > MAX_EXHAUSTIVE {
        return Err(Error::config(format!(
            "exhaustive oracle supports n <= {MAX_EXHAUSTIVE}, got {n}"
        )));
    }
    if grid_steps < 2 {
        return Err(Error::config("oracle needs at least 2 grid points per axis"));
    }
    let f = |p: &[f64]| row_objective(p, inp.losses, inp.lambda, inp.gamma);

    let mut best = vec![0.0; n];
    let mut best_value = f(&best);
    let mut digits = vec![0usize; n];
    let mut point = vec![0.0; n];
    let step = 1.0 / (grid_steps - 1) as f64;
    'grid: loop {
        for (p, &d) in point.iter_mut().zip(&digits) {
            *p = d as f64 * step;
        }
        let value = f(&point);
        if value < best_value {
            best_value = value;
            best.copy_from_slice(&point);
        }
        for d in digits.iter_mut() {
            *d += 1;
            if *d < grid_steps {
                continue 'grid;
            }
            *d = 0;
        }
        break;
    }

    let mut p = best;
    let mut value = best_value;
    let mut t: f64 = 1.0;
    for _ in 0..50_000 {
        let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        let grad: Vec<f64> = p
            .iter()
            .zip(inp.losses)
            .map(|(x, l)| {
                let radial = if norm > 0.0 { inp.gamma * x / norm } else { 0.0 };
                l - inp.lambda + radial
            })
            .collect();
        t = (t * 2.0).min(1.0);
        let mut moved = false;
        while t > 1e-16 {
            let next: Vec<f64> = p
                .iter()
                .zip(&grad)
                .map(|(x, g)| (x - t * g).clamp(0.0, 1.0))
                .collect();
            let delta: Vec<f64> = next.iter().zip(&p).map(|(a, b)| a - b).collect();
            let lin: f64 = delta.iter().zip(&grad).map(|(d, g)| d * g).sum();
            let quad: f64 = delta.iter().map(|d| d * d).sum::<f64>() / (2.0 * t);
            let next_value = f(&next);
            if next_value <= value + lin + quad && next_value <= value {
                moved = delta.iter().any(|&d| d != 0.0);
                p = next;
                value = next_value;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok(p)
}

/// Solves every row of `losses` at the current `λ`, `γ`.
pub fn solve_rows(losses: &Matrix, lambda: f64, gamma: f64) -> Result<Vec<RowSolution>> {
    losses
        .row_iter()
        .map(|row| {
            let row: Vec<f64> = row.iter().copied().collect();
            solve_row(&RowSolveInputs {
                losses: &row,
                lambda,
                gamma,
            })
        })
        .collect()
}

/// Replaces every row of `P` by the row solution for the matching loss row.
/// `λ` and `γ` are left alone; see [`anneal`].
pub fn update_pace(pace: &PaceState, losses: &Matrix) -> Result<PaceState> {
    let rows = update_pace_rows(pace, losses)?;
    Ok(rows.0)
}

/// [`update_pace`] that also returns the per-row solutions.
pub fn update_pace_rows(pace: &PaceState, losses: &Matrix) -> Result<(PaceState, Vec<RowSolution>)> {
    if losses.shape() != pace.p.shape() {
        return Err(Error::shape(format!(
            "losses are {:?}, pace weights are {:?}",
            losses.shape(),
            pace.p.shape()
        )));
    }
    let rows = solve_rows(losses, pace.lambda, pace.gamma)?;
    let mut next = pace.clone();
    for (i, sol) in rows.iter().enumerate() {
        for (j, &w) in sol.weights.iter().enumerate() {
            next.p[(i, j)] = w;
        }
    }
    Ok((next, rows))
}

/// `λ ← λ·μ₁`, `γ ← γ·μ₂`.
pub fn anneal(pace: &PaceState) -> PaceState {
    PaceState {
        lambda: pace.lambda * pace.mu1,
        gamma: pace.gamma * pace.mu2,
        ..pace.clone()
    }
}
