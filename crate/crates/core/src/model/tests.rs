use super::*;
use crate::data::NormalizerStats;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

struct Case {
    ds: MultiLabelDataset,
    part: GroupPartition,
    params: HyperParams,
    state: ModelState,
    pace: PaceState,
}

fn case(seed: u64) -> Case {
    let (d, n, l, k, m, g) = (4, 9, 5, 3, 2, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random(&mut rng, d, n);
    let y = Matrix::from_fn(l, n, |_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 });
    let mask = Matrix::from_fn(l, n, |_, _| if rng.random_bool(0.6) { 1.0 } else { 0.0 });
    let ds = MultiLabelDataset::with_mask(x, y, mask).unwrap();
    let part = GroupPartition::new(vec![0, 1, 2, 0, 1, 2, 0, 0, 1], g).unwrap();
    let params = HyperParams {
        alpha: 1.3,
        beta1: 0.6,
        beta2: 0.4,
        tau: 0.01,
        k,
        m,
        g,
    };
    let state = ModelState {
        u: random(&mut rng, l, k),
        v: random(&mut rng, k, n),
        w: random(&mut rng, d, k),
        z: (0..g).map(|_| project_unit_rows(&random(&mut rng, l, m))).collect(),
    };
    let p = Matrix::from_fn(k, n, |_, _| rng.random_range(0.0..1.0));
    let pace = PaceState::new(p, 0.4, 0.7, 1.1, 0.9).unwrap();
    Case {
        ds,
        part,
        params,
        state,
        pace,
    }
}

/// Objective recomputed entry by entry.
fn loop_objective(c: &Case) -> f64 {
    let (x, y, j) = (c.ds.features(), c.ds.labels(), c.ds.mask());
    let (d, n) = x.shape();
    let l = y.nrows();
    let HyperParams {
        alpha,
        beta1,
        beta2,
        tau,
        k,
        m,
        ..
    } = c.params;
    let s = &c.state;
    let mut total = 0.0;
    for i in 0..l {
        for t in 0..n {
            let mut uv = 0.0;
            for r in 0..k {
                uv += s.u[(i, r)] * s.v[(r, t)];
            }
            total += j[(i, t)] * (y[(i, t)] - uv).powi(2);
        }
    }
    let mut a = vec![vec![0.0; n]; k];
    for r in 0..k {
        for t in 0..n {
            for q in 0..d {
                a[r][t] += s.w[(q, r)] * x[(q, t)];
            }
            total += alpha * c.pace.p[(r, t)] * (s.v[(r, t)] - a[r][t]).powi(2);
        }
    }
    let mut f = vec![vec![0.0; n]; l];
    for i in 0..l {
        for t in 0..n {
            for r in 0..k {
                f[i][t] += s.u[(i, r)] * a[r][t];
            }
        }
    }
    let members: Vec<Vec<usize>> = (0..c.params.g)
        .map(|b| (0..n).filter(|&t| c.part.assignment()[t] == b).collect())
        .collect();
    for (b, cols) in members.iter().enumerate() {
        let z = &s.z[b];
        // tr(Fᵀ Z Zᵀ F) = Σ_t Σ_q (Σ_i z_iq f_it)²
        let proj = |t: usize, q: usize| (0..l).map(|i| z[(i, q)] * f[i][t]).sum::<f64>();
        let global: f64 = (0..n).flat_map(|t| (0..m).map(move |q| (t, q))).map(|(t, q)| proj(t, q).powi(2)).sum();
        let local: f64 = cols.iter().flat_map(|&t| (0..m).map(move |q| (t, q))).map(|(t, q)| proj(t, q).powi(2)).sum();
        total += beta1 * cols.len() as f64 / n as f64 * global + beta2 * local;
    }
    for r in 0..k {
        let row: Vec<f64> = (0..n).map(|t| c.pace.p[(r, t)]).collect();
        total -= c.pace.lambda * row.iter().sum::<f64>();
        total += c.pace.gamma * row.iter().map(|p| p * p).sum::<f64>().sqrt();
    }
    let sq = |m: &Matrix| m.iter().map(|v| v * v).sum::<f64>();
    total + tau * (sq(&s.u) + sq(&s.v) + sq(&s.w))
}

#[test]
fn objective_matches_loop_oracle() {
    for seed in 0..5 {
        let c = case(seed);
        let terms = objective(&c.state, &c.pace, &c.ds, &c.part, &c.params).unwrap();
        let reference = loop_objective(&c);
        assert!((terms.total() - reference).abs() <= 1e-10 * reference.abs(), "seed {seed}");
    }
}

#[test]
fn objective_of_zero_model_counts_observed_cells() {
    let mut c = case(1);
    c.state.u.fill(0.0);
    c.state.v.fill(0.0);
    c.state.w.fill(0.0);
    c.pace.p.fill(0.0);
    let terms = objective(&c.state, &c.pace, &c.ds, &c.part, &c.params).unwrap();
    assert_eq!(terms.total(), c.ds.observed_count() as f64);
}

#[test]
fn breakdown_sums_to_total() {
    let c = case(2);
    let t = objective(&c.state, &c.pace, &c.ds, &c.part, &c.params).unwrap();
    assert_eq!(t.model_fit() + t.pace(), t.total());
    assert!(t.pace_l1 <= 0.0 && t.pace_l2 >= 0.0);
}

#[test]
fn all_ones_pace_without_pace_terms_is_host_objective() {
    let c = case(3);
    let host = PaceState::host(3, 9);
    let with_terms = PaceState::new(host.p.clone(), 0.0, 0.0, 1.0, 1.0).unwrap();
    let a = objective(&c.state, &host, &c.ds, &c.part, &c.params).unwrap();
    let b = objective(&c.state, &with_terms, &c.ds, &c.part, &c.params).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.pace(), 0.0);
    let alpha = c.params.alpha;
    let plain = alpha * (&c.state.v - c.state.w.transpose() * c.ds.features()).norm_squared();
    assert!((a.residual - plain).abs() < 1e-12 * plain);
}

#[test]
fn objective_rejects_non_unit_rows() {
    let mut c = case(4);
    c.state.z[1][(0, 0)] += 0.1;
    let err = objective(&c.state, &c.pace, &c.ds, &c.part, &c.params).unwrap_err();
    assert!(matches!(err, Error::Invariant(_)));
}

#[test]
fn objective_rejects_bad_shapes() {
    let mut c = case(5);
    c.state.w = Matrix::zeros(3, 3);
    assert!(matches!(
        objective(&c.state, &c.pace, &c.ds, &c.part, &c.params),
        Err(Error::Shape(_))
    ));
}

#[test]
fn predict_scores_examples() {
    let state = ModelState {
        u: Matrix::from_element(1, 1, 2.0),
        v: Matrix::zeros(1, 1),
        w: Matrix::from_element(1, 1, 3.0),
        z: vec![],
    };
    let s = predict_scores(&state, &Matrix::from_element(1, 1, 5.0)).unwrap();
    assert_eq!(s[(0, 0)], 30.0);

    let zero_w = ModelState {
        u: Matrix::identity(3, 2),
        v: Matrix::zeros(2, 1),
        w: Matrix::zeros(4, 2),
        z: vec![],
    };
    assert_eq!(predict_scores(&zero_w, &Matrix::from_element(4, 2, 1.0)).unwrap(), Matrix::zeros(3, 2));
    assert!(matches!(predict_scores(&zero_w, &Matrix::zeros(3, 2)), Err(Error::Shape(_))));
}

#[test]
fn predict_scores_match_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (l, k, d, n) = (3, 2, 4, 5);
    let state = ModelState {
        u: random(&mut rng, l, k),
        v: Matrix::zeros(k, n),
        w: random(&mut rng, d, k),
        z: vec![],
    };
    let x = random(&mut rng, d, n);
    let scores = predict_scores(&state, &x).unwrap();
    for i in 0..l {
        for t in 0..n {
            let mut acc = 0.0;
            for r in 0..k {
                for q in 0..d {
                    acc += state.u[(i, r)] * state.w[(q, r)] * x[(q, t)];
                }
            }
            assert!((scores[(i, t)] - acc).abs() < 1e-12);
        }
    }
    let doubled = predict_scores(&state, &(&x * 2.0)).unwrap();
    assert!((doubled - scores * 2.0).amax() < 1e-12);
}

#[test]
fn predict_labels_tie_rule() {
    let s = Matrix::from_row_slice(1, 3, &[-0.5, 0.0, 1e-9]);
    assert_eq!(predict_labels(&s), Matrix::from_row_slice(1, 3, &[-1.0, 1.0, 1.0]));
}

#[test]
fn residual_loss_examples() {
    let state = ModelState {
        u: Matrix::zeros(1, 1),
        v: Matrix::from_element(1, 1, 4.0),
        w: Matrix::from_element(1, 1, 1.0),
        z: vec![],
    };
    let loss = residual_loss(&state, &Matrix::from_element(1, 1, 1.0), 2.0);
    assert_eq!(loss[(0, 0)], 18.0);

    let c = case(6);
    let mut fitted = c.state.clone();
    fitted.v = fitted.w.transpose() * c.ds.features();
    assert_eq!(residual_loss(&fitted, c.ds.features(), 1.0).amax(), 0.0);

    let loss = residual_loss(&c.state, c.ds.features(), c.params.alpha);
    let x = c.ds.features();
    for r in 0..3 {
        for t in 0..9 {
            let a: f64 = (0..4).map(|q| c.state.w[(q, r)] * x[(q, t)]).sum();
            let want = c.params.alpha * (c.state.v[(r, t)] - a).powi(2);
            assert!((loss[(r, t)] - want).abs() < 1e-12);
        }
    }
}

#[test]
fn project_unit_rows_examples() {
    let z = Matrix::from_row_slice(3, 2, &[3.0, 4.0, 1.0, 0.0, 0.0, 0.0]);
    let p = project_unit_rows(&z);
    assert!((p[(0, 0)] - 0.6).abs() < 1e-15 && (p[(0, 1)] - 0.8).abs() < 1e-15);
    assert_eq!(p.row(1), z.row(1));
    assert_eq!((p[(2, 0)], p[(2, 1)]), (1.0, 0.0));
    assert_eq!(project_unit_rows(&p), p);
}

#[test]
fn initialize_recovers_exact_rank() {
    // a ±1 matrix of rank 2: rows are ± copies of two patterns
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (l, n) = (6, 12);
    let a: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let b: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let y = Matrix::from_fn(l, n, |i, t| {
        let base = if i % 2 == 0 { a[t] } else { b[t] };
        if i < 3 { base } else { -base }
    });
    let x = random(&mut rng, 3, n);
    let ds = MultiLabelDataset::new(x, y.clone()).unwrap();
    let mut params = HyperParams::for_labels(l, 2);
    params.k = 2;
    params.m = 2;
    let state = initialize(&ds, &params, 9).unwrap();
    assert!((&state.u * &state.v - &y).amax() <= 1e-8);
    assert!(state.max_unit_row_error() <= UNIT_ROW_TOL);
    assert_eq!(state.z.len(), 2);
    assert_eq!(initialize(&ds, &params, 9).unwrap(), state);
    assert_ne!(initialize(&ds, &params, 10).unwrap().z, state.z);

    params.k = 3;
    assert!(matches!(initialize(&ds, &params, 9), Err(Error::Config(_))));
}

#[test]
fn initialize_rejects_large_k() {
    let ds = case(1).ds;
    let mut params = HyperParams::for_labels(5, 1);
    params.k = 6;
    assert!(matches!(initialize(&ds, &params, 0), Err(Error::Config(_))));
}

#[test]
fn checkpoint_round_trip() {
    let c = case(7);
    let ckpt = Checkpoint {
        params: c.params,
        state: c.state.clone(),
        normalizer: Some(NormalizerStats::fit(c.ds.features())),
    };
    let text = ckpt.to_text();
    assert_eq!(Checkpoint::parse(&text).unwrap(), ckpt);
    let bare = Checkpoint {
        normalizer: None,
        ..ckpt.clone()
    };
    assert_eq!(Checkpoint::read(bare.to_text().as_bytes()).unwrap(), bare);

    let bumped = text.replacen("spmld-checkpoint 1", "spmld-checkpoint 7", 1);
    assert!(matches!(Checkpoint::parse(&bumped), Err(Error::Unsupported(_))));
    let truncated: String = text.lines().take(6).collect::<Vec<_>>().join("\n");
    assert!(matches!(Checkpoint::parse(&truncated), Err(Error::Parse { .. })));
}

#[test]
fn hyper_defaults_and_validation() {
    let p = HyperParams::for_labels(45, 5);
    assert_eq!((p.alpha, p.beta1, p.beta2, p.tau), (1.0, 0.5, 0.5, 1e-3));
    assert_eq!((p.k, p.m), (20, 20));
    assert_eq!(HyperParams::for_labels(6, 1).k, 6);
    assert!(HyperParams { tau: -1.0, ..p }.validate().is_err());
    assert!(HyperParams { g: 0, ..p }.validate().is_err());
}

#[test]
fn pace_state_validation() {
    assert!(PaceState::new(Matrix::from_element(1, 1, 1.5), 0.1, 0.1, 1.1, 0.9).is_err());
    assert!(PaceState::new(Matrix::zeros(1, 1), 0.1, 0.1, 0.9, 0.9).is_err());
    assert!(PaceState::new(Matrix::zeros(1, 1), 0.1, 0.1, 1.1, 0.0).is_err());
    assert_eq!(PaceState::host(2, 3).mean_weight(), 1.0);
}
