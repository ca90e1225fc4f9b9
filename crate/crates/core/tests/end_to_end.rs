use spmld::data::{
    parse_arff_numeric, parse_sparse_multilabel, synthesize, write_arff, write_sparse_multilabel, SplitSpec,
    SynthConfig,
};
use spmld::metrics::{self, Metric};
use spmld::model::{self, Checkpoint, HyperParams, PaceState};
use spmld::optim::{self, OptimConfig};
use spmld::partition::{kmeans, GroupPartition};

fn synth(noise_rate: f64, seed: u64) -> spmld::data::Synthetic {
    synthesize(&SynthConfig {
        d: 12,
        n: 160,
        l: 8,
        k: 3,
        g: 2,
        noise_rate,
        hard_fraction: 0.25,
        seed,
    })
    .unwrap()
}

#[test]
fn file_formats_round_trip() {
    let ds = synth(0.2, 1).dataset;
    let mut sparse = Vec::new();
    write_sparse_multilabel(&ds, &mut sparse).unwrap();
    let back = parse_sparse_multilabel(std::str::from_utf8(&sparse).unwrap()).unwrap();
    assert_eq!(back.labels(), ds.labels());
    assert_eq!(back.features(), ds.features());

    let mut arff = Vec::new();
    write_arff(&ds, "synthetic", &mut arff).unwrap();
    let back = parse_arff_numeric(std::str::from_utf8(&arff).unwrap(), ds.n_labels()).unwrap();
    assert_eq!(back.labels(), ds.labels());
    assert_eq!(back.features(), ds.features());
}

#[test]
fn kmeans_finds_the_generating_groups() {
    let syn = synth(0.0, 2);
    let part = kmeans(syn.dataset.features(), 2, 0, 100).unwrap();
    let agree = part
        .assignment()
        .iter()
        .zip(&syn.groups)
        .filter(|(a, b)| a == b)
        .count();
    // labels of the two clusters may be swapped
    assert!(agree == 0 || agree == syn.groups.len(), "{agree}");
}

#[test]
fn training_beats_the_initialization_on_held_out_data() {
    let syn = synth(0.3, 3);
    let (train, test) = syn.dataset.split(&SplitSpec::new(0.7, 4).unwrap()).unwrap();
    let train = train.mask_labels(0.6, 5);
    let (train, stats) = train.normalize_features();
    let test = stats.apply(&test).unwrap();

    let part = kmeans(train.features(), 2, 6, 100).unwrap();
    let mut params = HyperParams::for_labels(8, 2);
    (params.k, params.m, params.beta1, params.beta2) = (3, 3, 0.05, 0.05);
    let problem = model::Problem::new(&train, &part, params).unwrap();
    let init = model::initialize(&train, &params, 7).unwrap();
    let pace = optim::initial_pace(&problem, &init, 0.1, 1.0, 1.1, 0.95).unwrap();
    let cfg = OptimConfig {
        max_outer_iters: 40,
        ..OptimConfig::default()
    };
    let out = optim::fit_from(&problem, init.clone(), pace, &cfg).unwrap();
    assert!(out.state.max_unit_row_error() <= 1e-10);
    assert!(out.pace.p.iter().all(|&p| (0.0..=1.0).contains(&p)));

    let score = |state| {
        let scores = model::predict_scores(state, test.features()).unwrap();
        metrics::evaluate(&scores, test.labels()).unwrap()
    };
    let (before, after) = (score(&init), score(&out.state));
    let rl = |r: &metrics::MetricsReport| r.mean(Metric::RankingLoss).unwrap();
    assert!(rl(&after) < rl(&before), "{} !< {}", rl(&after), rl(&before));
    assert!(after.mean(Metric::AvgAuc).unwrap() > 0.8);

    // a saved checkpoint predicts identically
    let ckpt = Checkpoint {
        params,
        state: out.state.clone(),
        normalizer: Some(stats),
    };
    let restored = Checkpoint::parse(&ckpt.to_text()).unwrap();
    assert_eq!(
        model::predict_scores(&restored.state, test.features()).unwrap(),
        model::predict_scores(&out.state, test.features()).unwrap()
    );
}

#[test]
fn host_mode_keeps_unit_weights() {
    let syn = synth(0.2, 8);
    let ds = syn.dataset.mask_labels(0.5, 9);
    let part = GroupPartition::new(syn.groups, 2).unwrap();
    let mut params = HyperParams::for_labels(8, 2);
    (params.k, params.m) = (3, 3);
    let cfg = OptimConfig {
        max_outer_iters: 5,
        freeze_pace: true,
        ..OptimConfig::default()
    };
    let out = optim::fit(&ds, &part, &params, &PaceState::host(3, 160), &cfg).unwrap();
    assert!(out.pace.p.iter().all(|&p| p == 1.0));
    assert_eq!((out.pace.lambda, out.pace.gamma), (0.0, 0.0));
    assert!((1..=5).contains(&out.trace.records.len()));
}
