use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{project_unit_rows, HyperParams, ModelState};
use crate::data::MultiLabelDataset;
use crate::error::{Error, Result};
use crate::Matrix;

/// Spectral warm start.
///
/// `U` and `V` come from the rank-`k` truncated SVD of `J∘Y` with the
/// singular values split evenly (`U = U_k Σ^½`, `V = Σ^½ V_kᵀ`), `W` is the
/// ridge solution of `V ≈ WᵀX` with penalty `τ`, and each `Z_b` is a seeded
/// Gaussian matrix with unit rows.
pub fn initialize(ds: &MultiLabelDataset, params: &HyperParams, seed: u64) -> Result<ModelState> {
    params.validate()?;
    let (l, n) = (ds.n_labels(), ds.n_instances());
    let k = params.k;
    if k > l.min(n) {
        return Err(Error::config(format!(
            "k = {k} exceeds min(l, n) = {}",
            l.min(n)
        )));
    }

    let observed = ds.labels().component_mul(ds.mask());
    let svd = observed.svd(true, true);
    let (left, right) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Numerical {
            block: "init".into(),
            msg: "SVD did not produce singular vectors".into(),
        }),
    };
    let sigma = svd.singular_values;
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));

    let top = order.first().map_or(0.0, |&i| sigma[i]);
    let cutoff = top * f64::EPSILON * l.max(n) as f64;
    let rank = order.iter().filter(|&&i| sigma[i] > cutoff).count();
    if k > rank {
        return Err(Error::config(format!(
            "k = {k} exceeds the rank {rank} of the observed label matrix"
        )));
    }

    let mut u = Matrix::zeros(l, k);
    let mut v = Matrix::zeros(k, n);
    for (c, &i) in order.iter().take(k).enumerate() {
        let s = sigma[i].sqrt();
        u.set_column(c, &(left.column(i) * s));
        v.set_row(c, &(right.row(i) * s));
    }

    let w = ridge(ds.features(), &v, params.tau)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = (0..params.g)
        .map(|_| {
            let raw = Matrix::from_fn(l, params.m, |_, _| rng.sample::<f64, _>(StandardNormal));
            project_unit_rows(&raw)
        })
        .collect();

    Ok(ModelState { u, v, w, z })
}

/// Minimizes `‖V − WᵀX‖² + τ‖W‖²`, solving the smaller of the primal
/// (`d×d`) and dual (`n×n`) normal equations.
fn ridge(x: &Matrix, v: &Matrix, tau: f64) -> Result<Matrix> {
    let (d, n) = x.shape();
    let w = if d <= n {
        let mut gram = x * x.transpose();
        for i in 0..d {
            gram[(i, i)] += tau;
        }
        solve_spd(gram, x * v.transpose())?
    } else {
        let mut gram = x.transpose() * x;
        for i in 0..n {
            gram[(i, i)] += tau;
        }
        x * solve_spd(gram, v.transpose())?
    };
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical {
            block: "init".into(),
            msg: "ridge solution is not finite".into(),
        });
    }
    Ok(w)
}

fn solve_spd(a: Matrix, b: Matrix) -> Result<Matrix> {
    if let Some(chol) = a.clone().cholesky() {
        return Ok(chol.solve(&b));
    }
    // singular system (tau = 0 with collinear features): least-norm solution
    a.svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|msg| Error::Numerical {
            block: "init".into(),
            msg: msg.to_string(),
        })
}
