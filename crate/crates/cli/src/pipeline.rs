//! Data preparation, training and evaluation shared by all commands.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use spmld::data::{
    read_arff_numeric, read_sparse_multilabel, split_indices, synthesize, MultiLabelDataset,
    NormalizerStats, SplitSpec,
};
use spmld::metrics::{self, MetricsReport};
use spmld::model::{self, Checkpoint, PaceState, Problem};
use spmld::optim::{self, FitTrace};
use spmld::partition::{kmeans, GroupPartition};

use crate::config::{Format, Mode, PartitionSource, RunConfig};
use crate::error::{io_error, CliError, Tag};

/// Independent stream for one pipeline stage of one seed.
pub fn stage_seed(seed: u64, stage: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stage.wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .rotate_left(17)
}

const SPLIT: u64 = 1;
const MASK: u64 = 2;
const PARTITION: u64 = 3;
const INIT: u64 = 4;

pub fn read_dataset(path: &Path, format: Format, arff_labels: Option<usize>) -> Result<MultiLabelDataset, CliError> {
    let file = File::open(path).map_err(|e| io_error("data", path, e))?;
    let reader = BufReader::new(file);
    let parsed = match format {
        Format::Sparse => read_sparse_multilabel(reader),
        Format::Arff => read_arff_numeric(reader, arff_labels.unwrap_or(0)),
    };
    parsed.map_err(|e| CliError::from_core("data", e).with_context(path.display()))
}

/// Raw data as configured: a single dataset to split, or a fixed pair.
#[derive(Debug, Clone)]
pub enum Source {
    Single(MultiLabelDataset),
    Pair(MultiLabelDataset, MultiLabelDataset),
}

impl Source {
    pub fn load(cfg: &RunConfig) -> Result<Self, CliError> {
        let d = &cfg.data;
        if let Some(syn) = &d.synthetic {
            let out = synthesize(&syn.to_config()).tag("data")?;
            return Ok(Source::Single(out.dataset));
        }
        let train_path = d
            .train
            .as_deref()
            .ok_or_else(|| CliError::user("config", "data.train is not set"))?;
        let train = read_dataset(train_path, d.format, d.arff_labels)?;
        match &d.test {
            Some(test_path) => {
                let test = read_dataset(test_path, d.format, d.arff_labels)?;
                if (test.n_features(), test.n_labels()) != (train.n_features(), train.n_labels()) {
                    return Err(CliError::user(
                        "data",
                        format!(
                            "test set has {} features and {} labels, training set {} and {}",
                            test.n_features(),
                            test.n_labels(),
                            train.n_features(),
                            train.n_labels()
                        ),
                    ));
                }
                Ok(Source::Pair(train, test))
            }
            None => Ok(Source::Single(train)),
        }
    }
}

/// Training data with masked labels and the held-out set, both raw.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: MultiLabelDataset,
    pub test: MultiLabelDataset,
    /// Positions of the training instances in the source dataset.
    pub train_index: Vec<usize>,
}

pub fn prepare(source: &Source, cfg: &RunConfig, seed: u64, rho: f64) -> Result<Prepared, CliError> {
    let (train, test, train_index) = match source {
        Source::Single(ds) => {
            let spec = SplitSpec::new(cfg.data.train_fraction, stage_seed(seed, SPLIT)).tag("data")?;
            let (tr, te) = split_indices(ds.n_instances(), &spec).tag("data")?;
            (
                ds.select_instances(&tr).tag("data")?,
                ds.select_instances(&te).tag("data")?,
                tr,
            )
        }
        Source::Pair(tr, te) => (tr.clone(), te.clone(), (0..tr.n_instances()).collect()),
    };
    let masked = train.mask_labels(rho, stage_seed(seed, MASK));
    Ok(Prepared {
        train: masked,
        test,
        train_index,
    })
}

fn partition(cfg: &RunConfig, prepared: &Prepared, features: &spmld::Matrix, seed: u64) -> Result<GroupPartition, CliError> {
    let g = cfg.model.g;
    match cfg.data.partition {
        PartitionSource::Kmeans => {
            kmeans(features, g, stage_seed(seed, PARTITION), cfg.data.kmeans_max_iters).tag("partition")
        }
        PartitionSource::File => {
            let path = cfg
                .data
                .partition_file
                .as_deref()
                .ok_or_else(|| CliError::user("config", "data.partition_file is not set"))?;
            let file = File::open(path).map_err(|e| io_error("partition", path, e))?;
            let total = prepared.train_index.iter().max().map_or(0, |m| m + 1);
            let full = GroupPartition::read(BufReader::new(file), total.max(prepared.train.n_instances()))
                .map_err(|e| CliError::from_core("partition", e).with_context(path.display()))?;
            let assignment = prepared
                .train_index
                .iter()
                .map(|&j| full.assignment()[j])
                .collect();
            GroupPartition::new(assignment, g).tag("partition")
        }
    }
}

/// Everything produced by one training run.
#[derive(Debug, Clone)]
pub struct Trained {
    pub checkpoint: Checkpoint,
    pub pace: PaceState,
    pub trace: FitTrace,
    pub partition: GroupPartition,
}

/// Normalizes, partitions, initializes and fits one prepared training set.
pub fn train(cfg: &RunConfig, prepared: &Prepared, seed: u64, mode: Mode) -> Result<Trained, CliError> {
    let raw = &prepared.train;
    let (ds, normalizer) = if cfg.data.normalize {
        let (ds, stats) = raw.normalize_features();
        (ds, Some(stats))
    } else {
        (raw.clone(), None)
    };
    let part = partition(cfg, prepared, ds.features(), seed)?;
    let params = cfg.hyper_params(ds.n_labels());
    let problem = Problem::new(&ds, &part, params).tag("model")?;
    let state = model::initialize(&ds, &params, stage_seed(seed, INIT)).tag("model")?;

    let mut run_cfg = cfg.clone();
    run_cfg.mode = mode;
    let optim_cfg = run_cfg.optim_config(stage_seed(seed, INIT));
    let pace = match mode {
        Mode::Glocal => PaceState::host(params.k, ds.n_instances()),
        Mode::Spmld => {
            let p = &cfg.pace;
            optim::initial_pace(&problem, &state, p.lambda0, p.gamma0, p.mu1, p.mu2).tag("selfpaced")?
        }
    };
    let out = optim::fit_from(&problem, state, pace, &optim_cfg).tag("optim")?;
    Ok(Trained {
        checkpoint: Checkpoint {
            params,
            state: out.state,
            normalizer,
        },
        pace: out.pace,
        trace: out.trace,
        partition: part,
    })
}

/// Scores the held-out set with a checkpoint.
pub fn evaluate(ckpt: &Checkpoint, test: &MultiLabelDataset) -> Result<MetricsReport, CliError> {
    let state = &ckpt.state;
    if test.n_features() != state.n_features() || test.n_labels() != state.n_labels() {
        return Err(CliError::user(
            "model",
            format!(
                "checkpoint expects {} features and {} labels, dataset has {} and {}",
                state.n_features(),
                state.n_labels(),
                test.n_features(),
                test.n_labels()
            ),
        ));
    }
    let features = match &ckpt.normalizer {
        Some(stats) => normalized(stats, test)?,
        None => test.features().clone(),
    };
    let scores = model::predict_scores(state, &features).tag("model")?;
    metrics::evaluate(&scores, test.labels()).tag("metrics")
}

fn normalized(stats: &NormalizerStats, ds: &MultiLabelDataset) -> Result<spmld::Matrix, CliError> {
    Ok(stats.apply(ds).tag("data")?.features().clone())
}

/// `prepare`, `train` and `evaluate` in one go.
pub fn run_once(source: &Source, cfg: &RunConfig, seed: u64, rho: f64, mode: Mode) -> Result<(Trained, MetricsReport), CliError> {
    let prepared = prepare(source, cfg, seed, rho)?;
    let trained = train(cfg, &prepared, seed, mode)?;
    let report = evaluate(&trained.checkpoint, &prepared.test)?;
    Ok((trained, report))
}
