//! Multi-label datasets and everything needed to get them into memory.
//!
//! Labels are stored as `±1` and the observation mask as `0/1`, both as `f64`
//! so they enter the objective without conversion. File formats use 0/1 or
//! presence lists; the conversion happens in the parsers.

mod arff;
mod sparse;
mod synth;

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::Matrix;

pub use arff::{parse_arff_numeric, read_arff_numeric, write_arff};
pub use sparse::{parse_sparse_multilabel, read_sparse_multilabel, write_sparse_multilabel};
pub use synth::{synthesize, SynthConfig, Synthetic};

/// Features (`d×n`, one column per instance), labels and observation mask
/// (both `l×n`).
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLabelDataset {
    features: Matrix,
    labels: Matrix,
    mask: Matrix,
    feature_names: Option<Vec<String>>,
    label_names: Option<Vec<String>>,
}

impl MultiLabelDataset {
    /// Builds a dataset with a fully observed mask.
    pub fn new(features: Matrix, labels: Matrix) -> Result<Self> {
        let mask = Matrix::from_element(labels.nrows(), labels.ncols(), 1.0);
        Self::with_mask(features, labels, mask)
    }

    pub fn with_mask(features: Matrix, labels: Matrix, mask: Matrix) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 || labels.nrows() == 0 {
            return Err(Error::shape(format!(
                "dataset needs d, n, l >= 1 (got d={}, n={}, l={})",
                features.nrows(),
                features.ncols(),
                labels.nrows()
            )));
        }
        if labels.ncols() != features.ncols() {
            return Err(Error::shape(format!(
                "{} feature columns but {} label columns",
                features.ncols(),
                labels.ncols()
            )));
        }
        if mask.shape() != labels.shape() {
            return Err(Error::shape(format!(
                "mask is {:?}, labels are {:?}",
                mask.shape(),
                labels.shape()
            )));
        }
        if let Some(v) = labels.iter().find(|&&v| v != 1.0 && v != -1.0) {
            return Err(Error::Domain(format!("label entry {v} is not ±1")));
        }
        if let Some(v) = mask.iter().find(|&&v| v != 1.0 && v != 0.0) {
            return Err(Error::Domain(format!("mask entry {v} is not 0/1")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite feature value".into()));
        }
        Ok(Self {
            features,
            labels,
            mask,
            feature_names: None,
            label_names: None,
        })
    }

    pub fn with_names(
        mut self,
        feature_names: Option<Vec<String>>,
        label_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if let Some(names) = &feature_names {
            if names.len() != self.n_features() {
                return Err(Error::shape("feature name count differs from d"));
            }
        }
        if let Some(names) = &label_names {
            if names.len() != self.n_labels() {
                return Err(Error::shape("label name count differs from l"));
            }
        }
        self.feature_names = feature_names;
        self.label_names = label_names;
        Ok(self)
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &Matrix {
        &self.labels
    }

    pub fn mask(&self) -> &Matrix {
        &self.mask
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn label_names(&self) -> Option<&[String]> {
        self.label_names.as_deref()
    }

    pub fn n_features(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_instances(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.nrows()
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&v| v == 1.0).count()
    }

    /// Replaces the mask after validating it.
    pub fn replace_mask(&self, mask: Matrix) -> Result<Self> {
        let mut out = Self::with_mask(self.features.clone(), self.labels.clone(), mask)?;
        out.feature_names = self.feature_names.clone();
        out.label_names = self.label_names.clone();
        Ok(out)
    }

    /// Replaces the features (same instance count, any dimension).
    pub fn replace_features(&self, features: Matrix) -> Result<Self> {
        let mut out = Self::with_mask(features, self.labels.clone(), self.mask.clone())?;
        if out.n_features() == self.n_features() {
            out.feature_names = self.feature_names.clone();
        }
        out.label_names = self.label_names.clone();
        Ok(out)
    }

    /// Dataset restricted to the given instance columns, in the given order.
    pub fn select_instances(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.n_instances()) {
            return Err(Error::Range(format!(
                "instance {bad} (n = {})",
                self.n_instances()
            )));
        }
        let mut out = Self::with_mask(
            self.features.select_columns(columns),
            self.labels.select_columns(columns),
            self.mask.select_columns(columns),
        )?;
        out.feature_names = self.feature_names.clone();
        out.label_names = self.label_names.clone();
        Ok(out)
    }

    /// Keeps exactly `round(rho·l·n)` observed cells, chosen by a seeded
    /// shuffle of all cells. `rho` is clamped to `[0, 1]`; labels are untouched.
    pub fn mask_labels(&self, rho: f64, seed: u64) -> Self {
        let rho = rho.clamp(0.0, 1.0);
        let (l, n) = self.labels.shape();
        let cells = l * n;
        let keep = (rho * cells as f64).round() as usize;
        let mut order: Vec<usize> = (0..cells).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let mut mask = Matrix::zeros(l, n);
        // cells are numbered column-major, matching nalgebra storage
        for &cell in &order[..keep] {
            mask[(cell % l, cell / l)] = 1.0;
        }
        let mut out = self.clone();
        out.mask = mask;
        out
    }

    /// Splits instances by a seeded permutation; see [`split_indices`].
    pub fn split(&self, spec: &SplitSpec) -> Result<(Self, Self)> {
        let (train, test) = split_indices(self.n_instances(), spec)?;
        Ok((self.select_instances(&train)?, self.select_instances(&test)?))
    }

    /// Standardizes each feature row using statistics of this dataset.
    pub fn normalize_features(&self) -> (Self, NormalizerStats) {
        let stats = NormalizerStats::fit(&self.features);
        let features = stats.transform(&self.features);
        let mut out = self.clone();
        out.features = features;
        (out, stats)
    }
}

/// Train fraction and permutation seed for [`MultiLabelDataset::split`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::config(format!(
                "train_fraction must lie strictly in (0, 1), got {train_fraction}"
            )));
        }
        Ok(Self {
            train_fraction,
            seed,
        })
    }
}

/// Train and test column indices, each ascending. The train side receives
/// `floor(train_fraction·n)` instances.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let spec = SplitSpec::new(spec.train_fraction, spec.seed)?;
    let n_train = (spec.train_fraction * n as f64).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::config(format!(
            "split of {n} instances at fraction {} leaves an empty side",
            spec.train_fraction
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Per-feature mean and standard deviation, reusable on held-out data.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizerStats {
    pub mean: Vec<f64>,
    /// Population standard deviation; zero marks a constant row.
    pub std: Vec<f64>,
}

impl NormalizerStats {
    pub fn fit(features: &Matrix) -> Self {
        let n = features.ncols() as f64;
        let mut mean = Vec::with_capacity(features.nrows());
        let mut std = Vec::with_capacity(features.nrows());
        for row in features.row_iter() {
            let mu = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            let sd = var.sqrt();
            mean.push(mu);
            std.push(if sd <= 1e-12 * mu.abs().max(1.0) { 0.0 } else { sd });
        }
        Self { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Applies the stored statistics; rows with zero spread map to zero.
    pub fn transform(&self, features: &Matrix) -> Matrix {
        let mut out = features.clone();
        for (i, mut row) in out.row_iter_mut().enumerate() {
            let (mu, sd) = (self.mean[i], self.std[i]);
            for v in row.iter_mut() {
                *v = if sd == 0.0 { 0.0 } else { (*v - mu) / sd };
            }
        }
        out
    }

    pub fn apply(&self, ds: &MultiLabelDataset) -> Result<MultiLabelDataset> {
        if ds.n_features() != self.dim() {
            return Err(Error::shape(format!(
                "normalizer has {} features, dataset has {}",
                self.dim(),
                ds.n_features()
            )));
        }
        ds.replace_features(self.transform(ds.features()))
    }
}

/// Writes one `label_idx,instance_idx` line per observed cell, column-major.
pub fn write_mask<W: Write>(mask: &Matrix, mut out: W) -> Result<()> {
    for j in 0..mask.ncols() {
        for i in 0..mask.nrows() {
            if mask[(i, j)] == 1.0 {
                writeln!(out, "{i},{j}")?;
            }
        }
    }
    Ok(())
}

/// Reads a mask file written by [`write_mask`] into an `l×n` matrix.
pub fn read_mask<R: BufRead>(input: R, l: usize, n: usize) -> Result<Matrix> {
    let mut mask = Matrix::zeros(l, n);
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(lineno + 1, "expected label_idx,instance_idx"))?;
        let i: usize = a
            .trim()
            .parse()
            .map_err(|_| Error::parse(lineno + 1, format!("bad label index {a:?}")))?;
        let j: usize = b
            .trim()
            .parse()
            .map_err(|_| Error::parse(lineno + 1, format!("bad instance index {b:?}")))?;
        if i >= l || j >= n {
            return Err(Error::Range(format!(
                "line {}: cell ({i},{j}) outside {l}x{n}",
                lineno + 1
            )));
        }
        mask[(i, j)] = 1.0;
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(l: usize, n: usize) -> MultiLabelDataset {
        let features = Matrix::from_fn(2, n, |i, j| (i * n + j) as f64);
        let labels = Matrix::from_fn(l, n, |i, j| if (i + j) % 3 == 0 { 1.0 } else { -1.0 });
        MultiLabelDataset::new(features, labels).unwrap()
    }

    #[test]
    fn rejects_bad_label_values() {
        let err = MultiLabelDataset::new(Matrix::zeros(1, 2), Matrix::from_element(1, 2, 0.0));
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_mismatched_instance_counts() {
        let err = MultiLabelDataset::new(Matrix::zeros(1, 2), Matrix::from_element(1, 3, 1.0));
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    #[test]
    fn mask_extremes() {
        let ds = toy(4, 5);
        assert_eq!(ds.mask_labels(1.0, 3).observed_count(), 20);
        assert_eq!(ds.mask_labels(0.0, 3).observed_count(), 0);
    }

    #[test]
    fn mask_count_and_determinism() {
        let ds = toy(10, 10);
        let a = ds.mask_labels(0.3, 7);
        let b = ds.mask_labels(0.3, 7);
        assert_eq!(a.observed_count(), 30);
        assert_eq!(a.mask(), b.mask());
        assert_eq!(a.labels(), ds.labels());
        assert_ne!(a.mask(), ds.mask_labels(0.3, 8).mask());
    }

    #[test]
    fn split_sizes() {
        let ds = toy(2, 10);
        let (tr, te) = ds.split(&SplitSpec::new(0.5, 1).unwrap()).unwrap();
        assert_eq!((tr.n_instances(), te.n_instances()), (5, 5));
        let (tr, te) = ds.split(&SplitSpec::new(0.99, 1).unwrap()).unwrap();
        assert_eq!((tr.n_instances(), te.n_instances()), (9, 1));
    }

    #[test]
    fn split_is_disjoint_and_deterministic() {
        let spec = SplitSpec::new(0.5, 42).unwrap();
        let (a, b) = split_indices(10, &spec).unwrap();
        let (a2, b2) = split_indices(10, &spec).unwrap();
        assert_eq!((&a, &b), (&a2, &b2));
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn empty_split_is_an_error() {
        let spec = SplitSpec::new(0.05, 1).unwrap();
        assert!(matches!(split_indices(10, &spec), Err(Error::Config(_))));
        assert!(SplitSpec::new(1.0, 1).is_err());
    }

    #[test]
    fn normalization_examples() {
        let features = Matrix::from_row_slice(2, 2, &[5.0, 5.0, 0.0, 2.0]);
        let labels = Matrix::from_element(1, 2, 1.0);
        let ds = MultiLabelDataset::new(features, labels).unwrap();
        let (norm, stats) = ds.normalize_features();
        assert_eq!(norm.features().row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0]);
        assert_eq!(norm.features().row(1).iter().copied().collect::<Vec<_>>(), vec![-1.0, 1.0]);
        assert_eq!(stats.apply(&ds).unwrap(), norm);
    }

    #[test]
    fn normalizer_only_uses_fitting_data() {
        let train = Matrix::from_row_slice(1, 2, &[0.0, 2.0]);
        let stats = NormalizerStats::fit(&train);
        let held_out = Matrix::from_row_slice(1, 3, &[100.0, 200.0, 300.0]);
        let out = stats.transform(&held_out);
        assert_eq!(out[(0, 0)], 99.0);
        assert_eq!(stats.mean, vec![1.0]);
    }

    #[test]
    fn mask_file_round_trip() {
        let ds = toy(3, 4).mask_labels(0.5, 9);
        let mut buf = Vec::new();
        write_mask(ds.mask(), &mut buf).unwrap();
        let back = read_mask(&buf[..], 3, 4).unwrap();
        assert_eq!(&back, ds.mask());
        assert!(read_mask(&b"3,0\n"[..], 3, 4).is_err());
    }
}
