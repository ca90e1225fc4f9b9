//! One function per subcommand. Each writes its artifacts into an output
//! directory; every file is written to a temporary name and renamed.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use spmld::data::{synthesize, write_mask, write_sparse_multilabel, SynthConfig};
use spmld::metrics::{self, Metric, MetricsReport, TTestRow};
use spmld::model::Checkpoint;
use spmld::optim::write_weights_csv;

use crate::config::{Format, Mode, RunConfig};
use crate::error::{io_error, CliError, Tag};
use crate::pipeline::{self, Source};
use crate::radar;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_error("cli", dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| io_error("cli", &tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_error("cli", path, e))
}

fn render(module: &'static str, f: impl FnOnce(&mut Vec<u8>) -> spmld::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf).tag(module)?;
    Ok(buf)
}

/// Config echo prefixed with the command, seed and wall time as comments;
/// loading it with `--config` reproduces the run.
fn manifest(command: &str, cfg: &RunConfig, seed: u64, started: Instant) -> String {
    format!(
        "# command: {command}\n# seed: {seed}\n# wall_time_secs: {:.3}\n# version: {}\n{}",
        started.elapsed().as_secs_f64(),
        env!("CARGO_PKG_VERSION"),
        cfg.to_toml()
    )
}

pub fn train(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let started = Instant::now();
    let seed = cfg.seed;
    let source = Source::load(cfg)?;
    let prepared = pipeline::prepare(&source, cfg, seed, cfg.data.rho)?;
    let trained = pipeline::train(cfg, &prepared, seed, cfg.mode)?;

    write_atomic(&out.join("model.ckpt"), trained.checkpoint.to_text().as_bytes())?;
    write_atomic(&out.join("trace.csv"), &render("optim", |b| trained.trace.write_csv(b))?)?;
    write_atomic(&out.join("pace.csv"), &render("selfpaced", |b| write_weights_csv(&trained.pace.p, b))?)?;
    write_atomic(&out.join("partition.txt"), &render("partition", |b| trained.partition.write(b))?)?;
    write_atomic(&out.join("mask.txt"), &render("data", |b| write_mask(prepared.train.mask(), b))?)?;
    if matches!(source, Source::Single(_)) {
        write_atomic(&out.join("test.txt"), &render("data", |b| write_sparse_multilabel(&prepared.test, b))?)?;
    }
    write_atomic(&out.join("manifest.toml"), manifest("train", cfg, seed, started).as_bytes())
}

pub fn evaluate(checkpoint: &Path, data: &Path, format: Format, arff_labels: Option<usize>, out: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(checkpoint).map_err(|e| io_error("model", checkpoint, e))?;
    let ckpt = Checkpoint::parse(&text)
        .map_err(|e| CliError::from_core("model", e).with_context(checkpoint.display()))?;
    let test = pipeline::read_dataset(data, format, arff_labels)?;
    let report = pipeline::evaluate(&ckpt, &test)?;
    write_atomic(&out.join("report.csv"), &render("metrics", |b| report.write_csv(b))?)
}

/// Column names for the configured modes; repeats get a numeric suffix.
fn method_names(modes: &[Mode]) -> Vec<String> {
    let mut names = Vec::with_capacity(modes.len());
    for (i, m) in modes.iter().enumerate() {
        let repeats = modes[..i].iter().filter(|x| *x == m).count();
        names.push(if repeats == 0 {
            m.to_string()
        } else {
            format!("{m}_{}", repeats + 1)
        });
    }
    names
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::user("cli", format!("cannot start worker pool: {e}")))
}

/// Per-method aggregated reports for one observed fraction.
pub struct RhoBlock {
    pub rho: f64,
    pub reports: Vec<MetricsReport>,
    pub t_tests: Vec<TTestRow>,
}

pub fn run_experiment(cfg: &RunConfig) -> Result<Vec<RhoBlock>, CliError> {
    let source = Source::load(cfg)?;
    let exp = &cfg.experiment;
    let names = method_names(&exp.modes);
    let jobs: Vec<(f64, u64)> = cfg
        .rhos()
        .into_iter()
        .flat_map(|rho| exp.seeds.iter().map(move |&s| (rho, s)))
        .collect();

    let pool = thread_pool(exp.threads)?;
    let results: Vec<Vec<MetricsReport>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(rho, seed)| {
                exp.modes
                    .iter()
                    .map(|&mode| {
                        pipeline::run_once(&source, cfg, seed, rho, mode)
                            .map(|(_, report)| report)
                            .map_err(|e| e.with_context(format!("seed {seed}, rho {rho}, {mode}")))
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    let per_rho = exp.seeds.len();
    let mut blocks = Vec::new();
    for (chunk, rho) in results.chunks(per_rho).zip(cfg.rhos()) {
        let reports = (0..names.len())
            .map(|m| {
                let seeds: Vec<MetricsReport> = chunk.iter().map(|r| r[m].clone()).collect();
                metrics::aggregate(&seeds).tag("metrics")
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut t_tests = Vec::new();
        if exp.seeds.len() >= 2 {
            for a in 0..names.len() {
                for b in a + 1..names.len() {
                    for metric in reports[a].metrics() {
                        let (xa, xb) = (&reports[a].get(metric), &reports[b].get(metric));
                        let (Some(xa), Some(xb)) = (xa, xb) else { continue };
                        let result = metrics::paired_t_test(&xa.per_seed, &xb.per_seed, exp.significance, metric.goal())
                            .tag("metrics")?;
                        t_tests.push(TTestRow {
                            method_a: names[a].clone(),
                            method_b: names[b].clone(),
                            metric,
                            result,
                        });
                    }
                }
            }
        }
        blocks.push(RhoBlock { rho, reports, t_tests });
    }
    Ok(blocks)
}

fn rho_tag(rho: f64) -> String {
    format!("rho{rho}")
}

/// Mean and standard deviation per metric, one column pair per method and
/// one block of rows per observed fraction.
pub fn table_csv(blocks: &[RhoBlock], names: &[String]) -> String {
    let mut text = String::from("rho,metric");
    for n in names {
        text.push_str(&format!(",{n}_mean,{n}_std"));
    }
    text.push('\n');
    for block in blocks {
        for metric in Metric::ALL {
            let mut line = format!("{},{metric}", block.rho);
            for r in &block.reports {
                match r.get(metric) {
                    Some(e) => line.push_str(&format!(",{:.6},{:.6}", e.mean, e.std)),
                    None => line.push_str(",,"),
                }
            }
            text.push_str(&line);
            text.push('\n');
        }
    }
    text
}

pub fn experiment(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let started = Instant::now();
    if cfg.experiment.seeds.len() < 2 {
        return Err(CliError::user("config", "experiments need at least two seeds for t-tests"));
    }
    let blocks = run_experiment(cfg)?;
    let names = method_names(&cfg.experiment.modes);
    for block in &blocks {
        for (name, report) in names.iter().zip(&block.reports) {
            let path = out.join(format!("report_{name}_{}.csv", rho_tag(block.rho)));
            write_atomic(&path, &render("metrics", |b| report.write_csv(b))?)?;
        }
        let path = out.join(format!("ttests_{}.csv", rho_tag(block.rho)));
        write_atomic(&path, &render("metrics", |b| metrics::write_t_tests_csv(&block.t_tests, b))?)?;
    }
    write_atomic(&out.join("table.csv"), table_csv(&blocks, &names).as_bytes())?;
    write_atomic(&out.join("manifest.toml"), manifest("experiment", cfg, cfg.seed, started).as_bytes())
}

/// One evaluated grid cell.
#[derive(Debug, Clone)]
pub struct GridRow {
    pub pace: [f64; 4],
    pub report: MetricsReport,
}

pub fn run_grid(cfg: &RunConfig) -> Result<Vec<GridRow>, CliError> {
    let g = &cfg.grid;
    for (name, values) in [("lambda0", &g.lambda0), ("gamma0", &g.gamma0), ("mu1", &g.mu1), ("mu2", &g.mu2)] {
        if values.is_empty() {
            return Err(CliError::user("config", format!("grid.{name} is empty")));
        }
    }
    let mut cells = Vec::new();
    for &l in &g.lambda0 {
        for &ga in &g.gamma0 {
            for &m1 in &g.mu1 {
                for &m2 in &g.mu2 {
                    cells.push([l, ga, m1, m2]);
                }
            }
        }
    }
    for c in &cells {
        let mut pace = cfg.pace;
        (pace.lambda0, pace.gamma0, pace.mu1, pace.mu2) = (c[0], c[1], c[2], c[3]);
        cfg.check_pace(&pace)?;
    }

    let source = Source::load(cfg)?;
    let metric = cfg.grid_metric()?;
    let pool = thread_pool(cfg.experiment.threads)?;
    let mut rows: Vec<GridRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|c| {
                let mut cell = cfg.clone();
                (cell.pace.lambda0, cell.pace.gamma0, cell.pace.mu1, cell.pace.mu2) = (c[0], c[1], c[2], c[3]);
                pipeline::run_once(&source, &cell, cfg.seed, cfg.data.rho, cfg.mode)
                    .map(|(_, report)| GridRow { pace: *c, report })
                    .map_err(|e| e.with_context(format!("grid cell {c:?}")))
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let key = |r: &GridRow| r.report.mean(metric).unwrap_or(f64::NAN);
    rows.sort_by(|a, b| match metric.goal() {
        metrics::Goal::Minimize => key(a).total_cmp(&key(b)),
        metrics::Goal::Maximize => key(b).total_cmp(&key(a)),
    });
    Ok(rows)
}

pub fn grid_csv(rows: &[GridRow]) -> String {
    let mut text = String::from("lambda0,gamma0,mu1,mu2");
    for m in Metric::ALL {
        text.push_str(&format!(",{m}"));
    }
    text.push('\n');
    for r in rows {
        let mut line = format!("{:e},{:e},{:e},{:e}", r.pace[0], r.pace[1], r.pace[2], r.pace[3]);
        for m in Metric::ALL {
            line.push_str(&format!(",{:e}", r.report.mean(m).unwrap_or(f64::NAN)));
        }
        text.push_str(&line);
        text.push('\n');
    }
    text
}

pub fn gridsearch(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let started = Instant::now();
    let rows = run_grid(cfg)?;
    write_atomic(&out.join("grid.csv"), grid_csv(&rows).as_bytes())?;
    write_atomic(&out.join("manifest.toml"), manifest("gridsearch", cfg, cfg.seed, started).as_bytes())
}

pub fn plot_radar(reports: &[PathBuf], names: &[String], out: &Path) -> Result<(), CliError> {
    if reports.len() < 2 {
        return Err(CliError::user("cli", "plot-radar needs at least two reports"));
    }
    if !names.is_empty() && names.len() != reports.len() {
        return Err(CliError::user("cli", "give one --name per report"));
    }
    let mut methods = Vec::new();
    for (i, path) in reports.iter().enumerate() {
        let file = fs::File::open(path).map_err(|e| io_error("metrics", path, e))?;
        let report = MetricsReport::read_csv(std::io::BufReader::new(file))
            .map_err(|e| CliError::from_core("metrics", e).with_context(path.display()))?;
        let name = names.get(i).cloned().unwrap_or_else(|| {
            path.file_stem()
                .map_or_else(|| format!("method {i}"), |s| s.to_string_lossy().into_owned())
        });
        methods.push((name, report));
    }
    let svg = radar::render(&methods)?;
    write_atomic(out, svg.as_bytes())
}

pub fn synth(cfg: &SynthConfig, out: &Path) -> Result<(), CliError> {
    let syn = synthesize(cfg).tag("data")?;
    write_atomic(&out.join("data.txt"), &render("data", |b| write_sparse_multilabel(&syn.dataset, b))?)?;
    let clean = spmld::data::MultiLabelDataset::new(syn.dataset.features().clone(), syn.clean_labels.clone()).tag("data")?;
    write_atomic(&out.join("clean.txt"), &render("data", |b| write_sparse_multilabel(&clean, b))?)?;
    let part = spmld::partition::GroupPartition::new(syn.groups.clone(), cfg.g).tag("partition")?;
    write_atomic(&out.join("groups.txt"), &render("partition", |b| part.write(b))?)?;
    let mut hard = format!(
        "# d={} n={} l={} k={} g={} noise_rate={} hard_fraction={} seed={}\n# flips={}\n",
        cfg.d, cfg.n, cfg.l, cfg.k, cfg.g, cfg.noise_rate, cfg.hard_fraction, cfg.seed, syn.flips
    );
    for j in &syn.hard_instances {
        hard.push_str(&format!("{j}\n"));
    }
    write_atomic(&out.join("hard.txt"), hard.as_bytes())
}
