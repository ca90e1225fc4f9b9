//! Learned quantities and the training objective.
//!
//! The model factors the label matrix as `Y ≈ UV` over the observed cells,
//! regresses the latent labels on the features (`V ≈ WᵀX`, weighted by the
//! pace matrix `P`), and penalizes predictions `F = UWᵀX` through learned
//! label Laplacians `Z_b Z_bᵀ`, once globally with weight `β₁ n_b / n` and
//! once locally on the columns of group `b` with weight `β₂`.

mod checkpoint;
mod init;

use crate::data::MultiLabelDataset;
use crate::error::{Error, Result};
use crate::partition::GroupPartition;
use crate::Matrix;

pub use checkpoint::Checkpoint;
pub use init::initialize;

/// Tolerance on `‖z_row‖ = 1` for Laplacian factor rows.
pub const UNIT_ROW_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub tau: f64,
    /// Latent label dimension (columns of `U`).
    pub k: usize,
    /// Rank of each Laplacian factor `Z_b`.
    pub m: usize,
    /// Number of instance groups.
    pub g: usize,
}

impl HyperParams {
    /// Default weights with `k = m = min(l, 20)`.
    pub fn for_labels(l: usize, g: usize) -> Self {
        let alpha = 1.0;
        Self {
            alpha,
            beta1: 0.5 * alpha,
            beta2: 0.5 * alpha,
            tau: 1e-3,
            k: l.min(20),
            m: l.min(20),
            g,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("tau", self.tau),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        if self.k == 0 || self.m == 0 || self.g == 0 {
            return Err(Error::config("k, m and g must be at least 1"));
        }
        Ok(())
    }
}

/// Factors `U` (l×k), `V` (k×n), `W` (d×k) and one `Z_b` (l×m) per group.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub u: Matrix,
    pub v: Matrix,
    pub w: Matrix,
    pub z: Vec<Matrix>,
}

impl ModelState {
    pub fn n_labels(&self) -> usize {
        self.u.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.u.ncols()
    }

    pub fn n_features(&self) -> usize {
        self.w.nrows()
    }

    /// Largest deviation of any `Z_b` row norm from one.
    pub fn max_unit_row_error(&self) -> f64 {
        self.z
            .iter()
            .flat_map(|z| z.row_iter().map(|r| (r.norm() - 1.0).abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }

    pub fn check_unit_rows(&self) -> Result<()> {
        let err = self.max_unit_row_error();
        if err > UNIT_ROW_TOL {
            return Err(Error::Invariant(format!(
                "Laplacian factor row norm off by {err:e}"
            )));
        }
        Ok(())
    }
}

/// Pace weights (`k×n`, entries in `[0,1]`) and the annealing schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct PaceState {
    pub p: Matrix,
    pub lambda: f64,
    pub gamma: f64,
    /// Growth ratio applied to `lambda` after every outer iteration.
    pub mu1: f64,
    /// Decay ratio applied to `gamma` after every outer iteration.
    pub mu2: f64,
}

impl PaceState {
    pub fn new(p: Matrix, lambda: f64, gamma: f64, mu1: f64, mu2: f64) -> Result<Self> {
        if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::Domain("pace weights must lie in [0, 1]".into()));
        }
        if !(lambda >= 0.0 && lambda.is_finite() && gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::config(format!(
                "lambda = {lambda} and gamma = {gamma} must be finite and >= 0"
            )));
        }
        if !(mu1 >= 1.0 && mu1.is_finite()) {
            return Err(Error::config(format!("mu1 = {mu1} must be >= 1")));
        }
        if !(mu2 > 0.0 && mu2 <= 1.0) {
            return Err(Error::config(format!("mu2 = {mu2} must lie in (0, 1]")));
        }
        Ok(Self {
            p,
            lambda,
            gamma,
            mu1,
            mu2,
        })
    }

    /// All weights one with both pace terms switched off: the plain host model.
    pub fn host(k: usize, n: usize) -> Self {
        Self {
            p: Matrix::from_element(k, n, 1.0),
            lambda: 0.0,
            gamma: 0.0,
            mu1: 1.0,
            mu2: 1.0,
        }
    }

    pub fn mean_weight(&self) -> f64 {
        if self.p.is_empty() {
            0.0
        } else {
            self.p.mean()
        }
    }
}

/// Objective value split into its additive terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObjectiveTerms {
    pub recon: f64,
    pub residual: f64,
    pub global_corr: f64,
    pub local_corr: f64,
    /// `−λ Σ P`
    pub pace_l1: f64,
    /// `γ Σ_i ‖P^(i)‖₂`
    pub pace_l2: f64,
    pub reg: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.recon
            + self.residual
            + self.global_corr
            + self.local_corr
            + self.pace_l1
            + self.pace_l2
            + self.reg
    }

    /// The terms that depend on `U`, `V`, `W` and `Z`.
    pub fn model_fit(&self) -> f64 {
        self.recon + self.residual + self.global_corr + self.local_corr + self.reg
    }

    /// The terms that depend on `P` alone.
    pub fn pace(&self) -> f64 {
        self.pace_l1 + self.pace_l2
    }
}

/// A dataset, its partition and the hyperparameters, with the group column
/// sets resolved once.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    ds: &'a MultiLabelDataset,
    part: &'a GroupPartition,
    params: HyperParams,
    groups: Vec<Vec<usize>>,
    group_features: Vec<Matrix>,
}

impl<'a> Problem<'a> {
    pub fn new(
        ds: &'a MultiLabelDataset,
        part: &'a GroupPartition,
        params: HyperParams,
    ) -> Result<Self> {
        params.validate()?;
        if part.n_instances() != ds.n_instances() {
            return Err(Error::shape(format!(
                "partition covers {} instances, dataset has {}",
                part.n_instances(),
                ds.n_instances()
            )));
        }
        if part.n_groups() != params.g {
            return Err(Error::shape(format!(
                "partition has {} groups, hyperparameters say g = {}",
                part.n_groups(),
                params.g
            )));
        }
        let groups = (0..params.g)
            .map(|b| part.members(b))
            .collect::<Result<Vec<_>>>()?;
        let group_features = groups
            .iter()
            .map(|cols| ds.features().select_columns(cols))
            .collect();
        Ok(Self {
            ds,
            part,
            params,
            groups,
            group_features,
        })
    }

    pub fn dataset(&self) -> &'a MultiLabelDataset {
        self.ds
    }

    pub fn partition(&self) -> &'a GroupPartition {
        self.part
    }

    pub fn params(&self) -> &HyperParams {
        &self.params
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn group(&self, b: usize) -> &[usize] {
        &self.groups[b]
    }

    pub(crate) fn group_features(&self, b: usize) -> &Matrix {
        &self.group_features[b]
    }

    /// `β₁ n_b / n`
    pub fn global_weight(&self, b: usize) -> f64 {
        self.params.beta1 * self.groups[b].len() as f64 / self.ds.n_instances() as f64
    }

    pub fn check_state(&self, state: &ModelState) -> Result<()> {
        let (d, n, l) = (
            self.ds.n_features(),
            self.ds.n_instances(),
            self.ds.n_labels(),
        );
        let HyperParams { k, m, g, .. } = self.params;
        let expect = |name: &str, got: (usize, usize), want: (usize, usize)| {
            if got == want {
                Ok(())
            } else {
                Err(Error::shape(format!("{name} is {got:?}, expected {want:?}")))
            }
        };
        expect("U", state.u.shape(), (l, k))?;
        expect("V", state.v.shape(), (k, n))?;
        expect("W", state.w.shape(), (d, k))?;
        if state.z.len() != g {
            return Err(Error::shape(format!(
                "{} Laplacian factors for {g} groups",
                state.z.len()
            )));
        }
        for z in &state.z {
            expect("Z_b", z.shape(), (l, m))?;
        }
        Ok(())
    }

    pub fn check_pace(&self, pace: &PaceState) -> Result<()> {
        let want = (self.params.k, self.ds.n_instances());
        if pace.p.shape() != want {
            return Err(Error::shape(format!(
                "P is {:?}, expected {want:?}",
                pace.p.shape()
            )));
        }
        Ok(())
    }

    /// Checked objective: shapes must agree and every `Z_b` row must be unit.
    pub fn objective(&self, state: &ModelState, pace: &PaceState) -> Result<ObjectiveTerms> {
        self.check_state(state)?;
        self.check_pace(pace)?;
        state.check_unit_rows()?;
        Ok(self.terms(state, pace))
    }

    /// The objective without the unit-row check, i.e. on the ambient space.
    pub fn terms(&self, state: &ModelState, pace: &PaceState) -> ObjectiveTerms {
        let x = self.ds.features();
        let (y, j) = (self.ds.labels(), self.ds.mask());
        let a = state.w.transpose() * x;

        let recon_res = (&state.u * &state.v - y).component_mul(j);
        let recon = recon_res.norm_squared();

        let diff = &state.v - &a;
        let residual = self.params.alpha
            * diff
                .iter()
                .zip(pace.p.iter())
                .map(|(e, p)| p * e * e)
                .sum::<f64>();

        let mut global_corr = 0.0;
        let mut local_corr = 0.0;
        if self.params.beta1 != 0.0 || self.params.beta2 != 0.0 {
            let (global, local) = self.laplacian_grams(state, &a);
            for b in 0..self.n_groups() {
                let z = &state.z[b];
                global_corr += self.global_weight(b) * trace_quadratic(z, &global);
                local_corr += self.params.beta2 * trace_quadratic(z, &local[b]);
            }
        }

        let pace_l1 = -pace.lambda * pace.p.sum();
        let pace_l2 = pace.gamma * pace.p.row_iter().map(|r| r.norm()).sum::<f64>();
        let reg = self.params.tau
            * (state.u.norm_squared() + state.v.norm_squared() + state.w.norm_squared());

        ObjectiveTerms {
            recon,
            residual,
            global_corr,
            local_corr,
            pace_l1,
            pace_l2,
            reg,
        }
    }

    /// `FFᵀ` over all instances and `F_bF_bᵀ` per group, given `A = WᵀX`.
    pub(crate) fn laplacian_grams(&self, state: &ModelState, a: &Matrix) -> (Matrix, Vec<Matrix>) {
        let l = state.u.nrows();
        let mut global = Matrix::zeros(l, l);
        let mut local = Vec::with_capacity(self.n_groups());
        for cols in &self.groups {
            let f_b = &state.u * a.select_columns(cols);
            let s_b = &f_b * f_b.transpose();
            global += &s_b;
            local.push(s_b);
        }
        (global, local)
    }

    /// Per-entry regression loss `α (V − WᵀX)²`, shape `k×n`.
    pub fn residual_loss(&self, state: &ModelState) -> Matrix {
        residual_loss(state, self.ds.features(), self.params.alpha)
    }
}

/// `tr(Zᵀ S Z)`
fn trace_quadratic(z: &Matrix, s: &Matrix) -> f64 {
    (s * z).component_mul(z).sum()
}

/// Evaluates the checked objective; see [`Problem::objective`].
pub fn objective(
    state: &ModelState,
    pace: &PaceState,
    ds: &MultiLabelDataset,
    part: &GroupPartition,
    params: &HyperParams,
) -> Result<ObjectiveTerms> {
    Problem::new(ds, part, *params)?.objective(state, pace)
}

/// `α (V − WᵀX)²` per entry.
pub fn residual_loss(state: &ModelState, features: &Matrix, alpha: f64) -> Matrix {
    let a = state.w.transpose() * features;
    (&state.v - a).map(|e| alpha * e * e)
}

/// Label scores `U Wᵀ X` for the given feature columns.
pub fn predict_scores(state: &ModelState, features: &Matrix) -> Result<Matrix> {
    if features.nrows() != state.w.nrows() {
        return Err(Error::shape(format!(
            "model expects {} features, input has {}",
            state.w.nrows(),
            features.nrows()
        )));
    }
    Ok(&state.u * (state.w.transpose() * features))
}

/// Thresholds scores at zero; a score of exactly zero maps to `+1`.
pub fn predict_labels(scores: &Matrix) -> Matrix {
    scores.map(|s| if s >= 0.0 { 1.0 } else { -1.0 })
}

/// Divides every row by its Euclidean norm. Zero rows become `(1, 0, …, 0)`.
pub fn project_unit_rows(z: &Matrix) -> Matrix {
    let mut out = z.clone();
    for mut row in out.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 && norm.is_finite() {
            row /= norm;
        } else {
            row.fill(0.0);
            row[0] = 1.0;
        }
    }
    out
}

#[cfg(test)]
mod tests;
