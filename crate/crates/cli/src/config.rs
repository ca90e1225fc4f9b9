//! Run configuration: a TOML file with `[section]` headers, overridable per
//! key from the command line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use spmld::data::{SplitSpec, SynthConfig};
use spmld::metrics::Metric;
use spmld::model::{HyperParams, PaceState};
use spmld::optim::OptimConfig;
use spmld::Matrix;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Spmld,
    Glocal,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Spmld => "spmld",
            Mode::Glocal => "glocal",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "spmld" => Ok(Mode::Spmld),
            "glocal" => Ok(Mode::Glocal),
            other => Err(format!("unknown mode {other:?} (expected spmld or glocal)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Sparse,
    Arff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionSource {
    #[default]
    Kmeans,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub d: usize,
    pub n: usize,
    pub l: usize,
    pub k: usize,
    pub g: usize,
    pub noise_rate: f64,
    pub hard_fraction: f64,
    pub seed: u64,
}

impl SynthSection {
    pub fn to_config(&self) -> SynthConfig {
        SynthConfig {
            d: self.d,
            n: self.n,
            l: self.l,
            k: self.k,
            g: self.g,
            noise_rate: self.noise_rate,
            hard_fraction: self.hard_fraction,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Training file, or the whole dataset when `test` is absent.
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub format: Format,
    /// Number of trailing label attributes in ARFF input.
    pub arff_labels: Option<usize>,
    /// Generate the data instead of reading it.
    pub synthetic: Option<SynthSection>,
    /// Fraction of training label entries kept observed.
    pub rho: f64,
    /// Train share when a single dataset is split.
    pub train_fraction: f64,
    pub normalize: bool,
    pub partition: PartitionSource,
    pub partition_file: Option<PathBuf>,
    pub kmeans_max_iters: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            train: None,
            test: None,
            format: Format::Sparse,
            arff_labels: None,
            synthetic: None,
            rho: 1.0,
            train_fraction: 0.7,
            normalize: true,
            partition: PartitionSource::Kmeans,
            partition_file: None,
            kmeans_max_iters: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub g: usize,
    /// Defaults to `min(l, 20)`.
    pub k: Option<usize>,
    pub m: Option<usize>,
    pub alpha: f64,
    /// Defaults to `alpha / 2`.
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub tau: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            g: 5,
            k: None,
            m: None,
            alpha: 1.0,
            beta1: None,
            beta2: None,
            tau: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PaceSection {
    pub lambda0: f64,
    pub gamma0: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl Default for PaceSection {
    fn default() -> Self {
        Self {
            lambda0: 1e-1,
            gamma0: 1.0,
            mu1: 1.1,
            mu2: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimSection {
    pub max_outer_iters: usize,
    pub inner_steps: usize,
    pub armijo_c: f64,
    pub backtrack_ratio: f64,
    pub rel_tol: f64,
}

impl Default for OptimSection {
    fn default() -> Self {
        let d = OptimConfig::default();
        Self {
            max_outer_iters: d.max_outer_iters,
            inner_steps: d.inner_steps_per_block,
            armijo_c: d.armijo_c,
            backtrack_ratio: d.backtrack_ratio,
            rel_tol: d.rel_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub seeds: Vec<u64>,
    /// Observed fractions; defaults to `data.rho`.
    pub rhos: Option<Vec<f64>>,
    pub modes: Vec<Mode>,
    pub significance: f64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            seeds: (1..=10).collect(),
            rhos: None,
            modes: vec![Mode::Spmld, Mode::Glocal],
            significance: 0.05,
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub lambda0: Vec<f64>,
    pub gamma0: Vec<f64>,
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
    /// Metric the output rows are sorted by.
    pub metric: String,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            lambda0: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
            gamma0: (1..=10).map(f64::from).collect(),
            mu1: vec![1.1, 1.2, 1.3, 1.4, 1.5],
            mu2: vec![0.95, 0.9, 0.85, 0.8, 0.75, 0.7],
            metric: Metric::RankingLoss.name().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub data: DataSection,
    pub model: ModelSection,
    pub pace: PaceSection,
    pub optim: OptimSection,
    pub experiment: ExperimentSection,
    pub grid: GridSection,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::user("config", msg)
}

/// Parses `section.key=value`; the value is read as TOML and falls back to a
/// plain string.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| config_err(format!("override {spec:?} is not key=value")))?;
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key was just written"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let keys: Vec<&str> = path.trim().split('.').collect();
    let (last, parents) = keys.split_last().expect("split yields at least one item");
    let mut cursor = table;
    for key in parents {
        let entry = cursor
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("{key} in {path:?} is not a section")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Parses TOML text, applies overrides, then validates.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| config_err(e.message().to_string()))?;
        for spec in overrides {
            apply_override(&mut table, spec)?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| config_err(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| config_err(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        let mut cfg = Self::from_toml(&text, overrides)?;
        if let Some(dir) = path.and_then(Path::parent) {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    /// Makes relative data paths relative to the config file's directory.
    fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.data.train, &mut self.data.test, &mut self.data.partition_file]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("# unserializable config: {e}\n"))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let d = &self.data;
        match (&d.train, &d.synthetic) {
            (None, None) => {
                return Err(config_err("set data.train or a [data.synthetic] section"));
            }
            (Some(_), Some(_)) => {
                return Err(config_err("data.train and [data.synthetic] are exclusive"));
            }
            _ => {}
        }
        if d.test.is_some() && d.synthetic.is_some() {
            return Err(config_err("data.test cannot be combined with [data.synthetic]"));
        }
        if d.format == Format::Arff && d.arff_labels.is_none() {
            return Err(config_err("ARFF input needs data.arff_labels"));
        }
        check_rho(d.rho)?;
        if d.test.is_none() {
            SplitSpec::new(d.train_fraction, 0).map_err(|e| config_err(e.to_string()))?;
        }
        if d.partition == PartitionSource::File && d.partition_file.is_none() {
            return Err(config_err("data.partition = \"file\" needs data.partition_file"));
        }
        if d.kmeans_max_iters == 0 {
            return Err(config_err("data.kmeans_max_iters must be >= 1"));
        }
        self.hyper_params(self.model.k.unwrap_or(1).max(1))
            .validate()
            .map_err(|e| config_err(e.to_string()))?;
        if self.model.k == Some(0) || self.model.m == Some(0) {
            return Err(config_err("model.k and model.m must be >= 1"));
        }
        self.check_pace(&self.pace)?;
        self.optim_config(0)
            .validate()
            .map_err(|e| config_err(e.to_string()))?;

        let e = &self.experiment;
        if e.seeds.is_empty() {
            return Err(config_err("experiment.seeds is empty"));
        }
        if e.modes.is_empty() {
            return Err(config_err("experiment.modes is empty"));
        }
        for &rho in e.rhos.iter().flatten() {
            check_rho(rho)?;
        }
        if e.rhos.as_ref().is_some_and(Vec::is_empty) {
            return Err(config_err("experiment.rhos is empty"));
        }
        if !(e.significance > 0.0 && e.significance < 1.0) {
            return Err(config_err("experiment.significance must lie in (0, 1)"));
        }
        self.grid_metric()?;
        Ok(())
    }

    /// Pace settings are checked against the pace-state domain.
    pub fn check_pace(&self, p: &PaceSection) -> Result<(), CliError> {
        PaceState::new(Matrix::zeros(0, 0), p.lambda0, p.gamma0, p.mu1, p.mu2)
            .map_err(|e| config_err(e.to_string()))?;
        if self.mode == Mode::Spmld && p.lambda0 <= 0.0 {
            return Err(config_err("pace.lambda0 must be > 0 in spmld mode"));
        }
        Ok(())
    }

    pub fn grid_metric(&self) -> Result<Metric, CliError> {
        self.grid
            .metric
            .parse()
            .map_err(|_| config_err(format!("unknown grid.metric {:?}", self.grid.metric)))
    }

    pub fn rhos(&self) -> Vec<f64> {
        self.experiment.rhos.clone().unwrap_or_else(|| vec![self.data.rho])
    }

    /// Hyperparameters for a dataset with `l` labels.
    pub fn hyper_params(&self, l: usize) -> HyperParams {
        let m = &self.model;
        let default = l.clamp(1, 20);
        HyperParams {
            alpha: m.alpha,
            beta1: m.beta1.unwrap_or(0.5 * m.alpha),
            beta2: m.beta2.unwrap_or(0.5 * m.alpha),
            tau: m.tau,
            k: m.k.unwrap_or(default),
            m: m.m.unwrap_or(default),
            g: m.g,
        }
    }

    pub fn optim_config(&self, seed: u64) -> OptimConfig {
        let o = &self.optim;
        OptimConfig {
            max_outer_iters: o.max_outer_iters,
            inner_steps_per_block: o.inner_steps,
            armijo_c: o.armijo_c,
            backtrack_ratio: o.backtrack_ratio,
            rel_tol: o.rel_tol,
            seed,
            freeze_pace: self.mode == Mode::Glocal,
        }
    }
}

fn check_rho(rho: f64) -> Result<(), CliError> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(config_err(format!("rho = {rho} must lie in (0, 1]")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[data]\ntrain = \"train.txt\"\n";

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = RunConfig::from_toml(MINIMAL, &[]).unwrap();
        assert_eq!(cfg.mode, Mode::Spmld);
        assert_eq!(cfg.experiment.seeds.len(), 10);
        assert_eq!(cfg.grid.lambda0.len(), 5);
        assert_eq!(cfg.grid.gamma0.len(), 10);
        let p = cfg.hyper_params(45);
        assert_eq!((p.k, p.m, p.beta1, p.beta2), (20, 20, 0.5, 0.5));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml("[data]\ntrain = \"a\"\nbogus = 1\n", &[]).unwrap_err();
        assert!(err.message.contains("bogus"), "{}", err.message);
        assert!(RunConfig::from_toml("[nonsense]\n", &[]).is_err());
    }

    #[test]
    fn overrides_replace_values() {
        let overrides = vec![
            "pace.lambda0=0.5".to_string(),
            "mode=glocal".to_string(),
            "experiment.seeds=[3, 4]".to_string(),
        ];
        let cfg = RunConfig::from_toml(MINIMAL, &overrides).unwrap();
        assert_eq!(cfg.pace.lambda0, 0.5);
        assert_eq!(cfg.mode, Mode::Glocal);
        assert_eq!(cfg.experiment.seeds, vec![3, 4]);
        assert!(RunConfig::from_toml(MINIMAL, &["nokey".to_string()]).is_err());
    }

    #[test]
    fn domains_are_validated() {
        for bad in [
            "data.rho=0.0",
            "pace.mu1=0.5",
            "pace.mu2=1.5",
            "optim.backtrack_ratio=1.0",
            "model.tau=-1.0",
            "grid.metric=\"accuracy\"",
            "experiment.seeds=[]",
        ] {
            assert!(RunConfig::from_toml(MINIMAL, &[bad.to_string()]).is_err(), "{bad}");
        }
        assert!(RunConfig::from_toml("", &[]).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let cfg = RunConfig::from_toml(MINIMAL, &["pace.gamma0=3.0".to_string()]).unwrap();
        let again = RunConfig::from_toml(&cfg.to_toml(), &[]).unwrap();
        assert_eq!(again, cfg);
    }
}
