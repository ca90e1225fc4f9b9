//! Exact gradients of the training objective for each block.

use crate::error::Result;
use crate::model::{ModelState, PaceState, Problem};
use crate::Matrix;

/// `A_b A_bᵀ` per group and `A Aᵀ` overall, with `A = WᵀX`.
struct LatentGrams {
    global: Matrix,
    local: Vec<Matrix>,
}

fn latent_grams(problem: &Problem<'_>, state: &ModelState) -> LatentGrams {
    let k = state.w.ncols();
    let mut global = Matrix::zeros(k, k);
    let mut local = Vec::with_capacity(problem.n_groups());
    for b in 0..problem.n_groups() {
        let a_b = state.w.transpose() * problem.group_features(b);
        let g = &a_b * a_b.transpose();
        global += &g;
        local.push(g);
    }
    LatentGrams { global, local }
}

/// `J∘(UV − Y)`
fn masked_residual(problem: &Problem<'_>, state: &ModelState) -> Matrix {
    let ds = problem.dataset();
    (&state.u * &state.v - ds.labels()).component_mul(ds.mask())
}

/// `2[(β₁n_b/n) FFᵀ + β₂ F_bF_bᵀ] Z_b`
pub fn grad_z(problem: &Problem<'_>, state: &ModelState, b: usize) -> Result<Matrix> {
    problem.check_state(state)?;
    let p = problem.params();
    let grams = latent_grams(problem, state);
    let weighted = &grams.global * problem.global_weight(b) + &grams.local[b] * p.beta2;
    let s = &state.u * weighted * state.u.transpose();
    Ok(s * &state.z[b] * 2.0)
}

/// `2[Uᵀ(J∘(UV − Y)) + α P∘(V − WᵀX) + τV]`
pub fn grad_v(problem: &Problem<'_>, state: &ModelState, pace: &PaceState) -> Result<Matrix> {
    problem.check_state(state)?;
    problem.check_pace(pace)?;
    let p = problem.params();
    let a = state.w.transpose() * problem.dataset().features();
    let fit = state.u.transpose() * masked_residual(problem, state);
    let reg = (&state.v - a).component_mul(&pace.p) * p.alpha;
    Ok((fit + reg + &state.v * p.tau) * 2.0)
}

/// `2[(J∘(UV − Y))Vᵀ + τU + Σ_b Z_bZ_bᵀ U ((β₁n_b/n) AAᵀ + β₂ A_bA_bᵀ)]`
pub fn grad_u(problem: &Problem<'_>, state: &ModelState) -> Result<Matrix> {
    problem.check_state(state)?;
    let p = problem.params();
    let mut g = masked_residual(problem, state) * state.v.transpose() + &state.u * p.tau;
    if p.beta1 != 0.0 || p.beta2 != 0.0 {
        let grams = latent_grams(problem, state);
        for (b, z) in state.z.iter().enumerate() {
            let weighted = &grams.global * problem.global_weight(b) + &grams.local[b] * p.beta2;
            g += z * (z.transpose() * &state.u) * weighted;
        }
    }
    Ok(g * 2.0)
}

/// `2[αX((A − V)ᵀ∘Pᵀ) + τW + Σ_b ((β₁n_b/n) XAᵀ + β₂ X_bA_bᵀ) UᵀZ_bZ_bᵀU]`
pub fn grad_w(problem: &Problem<'_>, state: &ModelState, pace: &PaceState) -> Result<Matrix> {
    problem.check_state(state)?;
    problem.check_pace(pace)?;
    let p = problem.params();
    let x = problem.dataset().features();
    let a = state.w.transpose() * x;
    let weighted_residual = (&a - &state.v).component_mul(&pace.p);
    let mut g = x * weighted_residual.transpose() * p.alpha + &state.w * p.tau;
    if p.beta1 != 0.0 || p.beta2 != 0.0 {
        let x_at = x * a.transpose();
        for (b, z) in state.z.iter().enumerate() {
            let zu = z.transpose() * &state.u;
            let core = zu.transpose() * zu;
            let x_b = problem.group_features(b);
            let a_b = state.w.transpose() * x_b;
            let mix = &x_at * problem.global_weight(b) + x_b * a_b.transpose() * p.beta2;
            g += mix * core;
        }
    }
    Ok(g * 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::MultiLabelDataset;
    use crate::model::{project_unit_rows, HyperParams};
    use crate::partition::GroupPartition;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Fixture {
        ds: MultiLabelDataset,
        part: GroupPartition,
        params: HyperParams,
        state: ModelState,
        pace: PaceState,
    }

    fn fixture(seed: u64) -> Fixture {
        let (d, n, l, k, m, g) = (6, 10, 5, 3, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let uniform = |r: &mut ChaCha8Rng| r.random_range(-1.0..1.0);
        let x = Matrix::from_fn(d, n, |_, _| uniform(&mut rng));
        let y = Matrix::from_fn(l, n, |_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 });
        let mask = Matrix::from_fn(l, n, |_, _| if rng.random_bool(0.7) { 1.0 } else { 0.0 });
        let ds = MultiLabelDataset::with_mask(x, y, mask).unwrap();
        let part = GroupPartition::new((0..n).map(|j| j % g).collect(), g).unwrap();
        let params = HyperParams {
            alpha: 0.7,
            beta1: 0.4,
            beta2: 0.3,
            tau: 0.05,
            k,
            m,
            g,
        };
        let state = ModelState {
            u: Matrix::from_fn(l, k, |_, _| uniform(&mut rng)),
            v: Matrix::from_fn(k, n, |_, _| uniform(&mut rng)),
            w: Matrix::from_fn(d, k, |_, _| uniform(&mut rng)),
            z: (0..g)
                .map(|_| project_unit_rows(&Matrix::from_fn(l, m, |_, _| uniform(&mut rng))))
                .collect(),
        };
        let p = Matrix::from_fn(k, n, |_, _| rng.random_range(0.0..1.0));
        let pace = PaceState::new(p, 0.3, 0.2, 1.1, 0.9).unwrap();
        Fixture {
            ds,
            part,
            params,
            state,
            pace,
        }
    }

    /// Central differences on the ambient objective for one block.
    fn numeric(
        problem: &Problem<'_>,
        state: &ModelState,
        pace: &PaceState,
        pick: impl Fn(&mut ModelState) -> &mut Matrix,
    ) -> Matrix {
        let h = 1e-5;
        let mut probe = state.clone();
        let shape = pick(&mut probe).shape();
        Matrix::from_fn(shape.0, shape.1, |i, j| {
            let mut plus = state.clone();
            pick(&mut plus)[(i, j)] += h;
            let mut minus = state.clone();
            pick(&mut minus)[(i, j)] -= h;
            (problem.terms(&plus, pace).total() - problem.terms(&minus, pace).total()) / (2.0 * h)
        })
    }

    fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
        (a - b).amax() / b.amax().max(1e-8)
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..5 {
            let f = fixture(seed);
            let problem = Problem::new(&f.ds, &f.part, f.params).unwrap();
            let (s, p) = (&f.state, &f.pace);
            for b in 0..2 {
                let g = grad_z(&problem, s, b).unwrap();
                let n = numeric(&problem, s, p, |st| &mut st.z[b]);
                assert!(rel_err(&g, &n) < 1e-5, "Z{b}: {}", rel_err(&g, &n));
            }
            let g = grad_v(&problem, s, p).unwrap();
            assert!(rel_err(&g, &numeric(&problem, s, p, |st| &mut st.v)) < 1e-5);
            let g = grad_u(&problem, s).unwrap();
            assert!(rel_err(&g, &numeric(&problem, s, p, |st| &mut st.u)) < 1e-5);
            let g = grad_w(&problem, s, p).unwrap();
            assert!(rel_err(&g, &numeric(&problem, s, p, |st| &mut st.w)) < 1e-5);
        }
    }

    #[test]
    fn zero_factor_cases() {
        let mut f = fixture(9);
        f.state.u.fill(0.0);
        let problem = Problem::new(&f.ds, &f.part, f.params).unwrap();
        assert_eq!(grad_z(&problem, &f.state, 0).unwrap().amax(), 0.0);

        let mut f = fixture(9);
        f.params.beta1 = 0.0;
        f.params.beta2 = 0.0;
        let problem = Problem::new(&f.ds, &f.part, f.params).unwrap();
        assert_eq!(grad_z(&problem, &f.state, 1).unwrap().amax(), 0.0);
    }

    #[test]
    fn grad_v_isolated_terms() {
        let mut f = fixture(3);
        f.pace.p.fill(0.0);
        let ds = f.ds.replace_mask(Matrix::zeros(5, 10)).unwrap();
        let problem = Problem::new(&ds, &f.part, f.params).unwrap();
        let g = grad_v(&problem, &f.state, &f.pace).unwrap();
        assert!((g - &f.state.v * (2.0 * f.params.tau)).amax() < 1e-15);
    }

    #[test]
    fn grad_v_stationary_point() {
        let mut f = fixture(4);
        f.params.tau = 0.0;
        f.state.v = f.state.w.transpose() * f.ds.features();
        // with every cell unobserved the reconstruction term is trivially fitted
        let ds = f.ds.replace_mask(Matrix::zeros(5, 10)).unwrap();
        let problem = Problem::new(&ds, &f.part, f.params).unwrap();
        let g = grad_v(&problem, &f.state, &f.pace).unwrap();
        assert!(g.amax() < 1e-12, "{}", g.amax());
    }

    #[test]
    fn grad_u_isolated_terms() {
        let mut f = fixture(5);
        f.state.u.fill(0.0);
        f.state.v.fill(0.0);
        f.state.w.fill(0.0);
        let ds = f.ds.replace_mask(Matrix::zeros(5, 10)).unwrap();
        let problem = Problem::new(&ds, &f.part, f.params).unwrap();
        assert_eq!(grad_u(&problem, &f.state).unwrap().amax(), 0.0);

        let mut f = fixture(6);
        f.params.beta1 = 0.0;
        f.params.beta2 = 0.0;
        f.params.tau = 0.0;
        let ds = f.ds.replace_mask(Matrix::from_element(5, 10, 1.0)).unwrap();
        let problem = Problem::new(&ds, &f.part, f.params).unwrap();
        let expect = (&f.state.u * &f.state.v - ds.labels()) * f.state.v.transpose() * 2.0;
        assert!((grad_u(&problem, &f.state).unwrap() - expect).amax() < 1e-12);
    }

    #[test]
    fn grad_w_isolated_terms() {
        let mut f = fixture(7);
        f.params.alpha = 0.0;
        f.params.tau = 0.0;
        f.params.beta1 = 0.0;
        f.params.beta2 = 0.0;
        let problem = Problem::new(&f.ds, &f.part, f.params).unwrap();
        assert_eq!(grad_w(&problem, &f.state, &f.pace).unwrap().amax(), 0.0);

        let mut f = fixture(8);
        f.params.beta1 = 0.0;
        f.params.beta2 = 0.0;
        f.pace.p.fill(0.0);
        let problem = Problem::new(&f.ds, &f.part, f.params).unwrap();
        let g = grad_w(&problem, &f.state, &f.pace).unwrap();
        assert!((g - &f.state.w * (2.0 * f.params.tau)).amax() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut f = fixture(1);
        let problem = Problem::new(&f.ds, &f.part, f.params).unwrap();
        f.state.v = Matrix::zeros(2, 10);
        assert!(grad_v(&problem, &f.state, &f.pace).is_err());
    }
}
