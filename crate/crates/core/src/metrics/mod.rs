//! Multi-label evaluation metrics.
//!
//! Scores and truth are `l×n` (labels by instances), truth in `{−1, +1}`.
//! Pairwise metrics count a tied pair as one half. Instances or labels for
//! which a pairwise metric is undefined are skipped and counted.

mod report;
mod ttest;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::Matrix;

pub use report::{aggregate, MetricEntry, MetricsReport};
pub use ttest::{paired_t_test, write_t_tests_csv, TTestResult, TTestRow, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    RankingLoss,
    Coverage,
    AvgAuc,
    InstanceAuc,
    MacroF1,
    MicroF1,
    InstanceF1,
}

/// Direction in which a metric improves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Goal {
    Minimize,
    Maximize,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::RankingLoss,
        Metric::Coverage,
        Metric::AvgAuc,
        Metric::InstanceAuc,
        Metric::MacroF1,
        Metric::MicroF1,
        Metric::InstanceF1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::RankingLoss => "ranking_loss",
            Metric::Coverage => "coverage",
            Metric::AvgAuc => "avg_auc",
            Metric::InstanceAuc => "instance_auc",
            Metric::MacroF1 => "macro_f1",
            Metric::MicroF1 => "micro_f1",
            Metric::InstanceF1 => "instance_f1",
        }
    }

    pub fn goal(self) -> Goal {
        match self {
            Metric::RankingLoss | Metric::Coverage => Goal::Minimize,
            _ => Goal::Maximize,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown metric {s:?}")))
    }
}

/// A metric averaged over the units (instances or labels) where it is defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Averaged {
    pub value: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

fn check_inputs(scores: &Matrix, truth: &Matrix) -> Result<()> {
    if scores.shape() != truth.shape() {
        return Err(Error::shape(format!(
            "scores are {:?}, truth is {:?}",
            scores.shape(),
            truth.shape()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Domain("scores must be finite".into()));
    }
    if truth.iter().any(|&t| t != 1.0 && t != -1.0) {
        return Err(Error::Domain("truth entries must be +1 or -1".into()));
    }
    Ok(())
}

fn average(sum: f64, evaluated: usize, skipped: usize, what: &str) -> Result<Averaged> {
    if evaluated == 0 {
        return Err(Error::UndefinedMetric(format!(
            "{what}: no unit has both classes ({skipped} skipped)"
        )));
    }
    Ok(Averaged {
        value: sum / evaluated as f64,
        evaluated,
        skipped,
    })
}

/// Twice the number of correctly ordered `(positive, negative)` pairs, ties
/// counting one, via mid-rank sums. Returns `(2·count, #pos, #neg)`.
fn doubled_pair_count(scores: &[f64], positive: &[bool]) -> (f64, usize, usize) {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // doubled 1-based mid-ranks keep everything integral
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let doubled_rank = (start + 1 + end) as f64;
        rank_sum += doubled_rank * order[start..end].iter().filter(|&&j| positive[j]).count() as f64;
        start = end;
    }
    let pos = positive.iter().filter(|&&p| p).count();
    let neg = n - pos;
    (rank_sum - (pos * (pos + 1)) as f64, pos, neg)
}

/// AUC of one score vector, `None` when a class is absent.
fn auc_of(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let (num, pos, neg) = doubled_pair_count(scores, positive);
    (pos > 0 && neg > 0).then(|| num / (2 * pos * neg) as f64)
}

fn rank_loss_of(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let (num, pos, neg) = doubled_pair_count(scores, positive);
    let pairs = (2 * pos * neg) as f64;
    (pos > 0 && neg > 0).then(|| (pairs - num) / pairs)
}

fn columns<'a>(scores: &'a Matrix, truth: &'a Matrix) -> impl Iterator<Item = (Vec<f64>, Vec<bool>)> + 'a {
    (0..scores.ncols()).map(move |j| {
        (
            scores.column(j).iter().copied().collect(),
            truth.column(j).iter().map(|&t| t > 0.0).collect(),
        )
    })
}

fn rows<'a>(scores: &'a Matrix, truth: &'a Matrix) -> impl Iterator<Item = (Vec<f64>, Vec<bool>)> + 'a {
    (0..scores.nrows()).map(move |i| {
        (
            scores.row(i).iter().copied().collect(),
            truth.row(i).iter().map(|&t| t > 0.0).collect(),
        )
    })
}

fn averaged_over(
    units: impl Iterator<Item = (Vec<f64>, Vec<bool>)>,
    per_unit: fn(&[f64], &[bool]) -> Option<f64>,
    what: &str,
) -> Result<Averaged> {
    let (mut sum, mut evaluated, mut skipped) = (0.0, 0, 0);
    for (s, p) in units {
        match per_unit(&s, &p) {
            Some(v) => {
                sum += v;
                evaluated += 1;
            }
            None => skipped += 1,
        }
    }
    average(sum, evaluated, skipped, what)
}

pub fn ranking_loss_detailed(scores: &Matrix, truth: &Matrix) -> Result<Averaged> {
    check_inputs(scores, truth)?;
    averaged_over(columns(scores, truth), rank_loss_of, "ranking_loss")
}

/// Mean fraction of misordered `(relevant, irrelevant)` label pairs.
pub fn ranking_loss(scores: &Matrix, truth: &Matrix) -> Result<f64> {
    ranking_loss_detailed(scores, truth).map(|a| a.value)
}

fn coverage_of(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let lowest = scores
        .iter()
        .zip(positive)
        .filter(|(_, &p)| p)
        .map(|(&s, _)| s)
        .min_by(f64::total_cmp)?;
    let depth = scores.iter().filter(|&&s| s >= lowest).count();
    Some((depth - 1) as f64)
}

pub fn coverage_detailed(scores: &Matrix, truth: &Matrix) -> Result<Averaged> {
    check_inputs(scores, truth)?;
    averaged_over(columns(scores, truth), coverage_of, "coverage")
}

/// Mean depth of the lowest-scored relevant label, counted from zero, with
/// ties resolved against the relevant label.
pub fn coverage(scores: &Matrix, truth: &Matrix) -> Result<f64> {
    coverage_detailed(scores, truth).map(|a| a.value)
}

pub fn avg_auc_detailed(scores: &Matrix, truth: &Matrix) -> Result<Averaged> {
    check_inputs(scores, truth)?;
    averaged_over(rows(scores, truth), auc_of, "avg_auc")
}

/// Per-label AUC over instances, averaged over labels.
pub fn avg_auc(scores: &Matrix, truth: &Matrix) -> Result<f64> {
    avg_auc_detailed(scores, truth).map(|a| a.value)
}

pub fn instance_auc_detailed(scores: &Matrix, truth: &Matrix) -> Result<Averaged> {
    check_inputs(scores, truth)?;
    averaged_over(columns(scores, truth), auc_of, "instance_auc")
}

/// Per-instance AUC over labels, averaged over instances.
pub fn instance_auc(scores: &Matrix, truth: &Matrix) -> Result<f64> {
    instance_auc_detailed(scores, truth).map(|a| a.value)
}

/// An F1 average and the number of units with no positives in either matrix
/// (scored 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Score {
    pub value: f64,
    pub vacuous: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

impl Counts {
    fn add(&mut self, pred: f64, truth: f64) {
        match (pred > 0.0, truth > 0.0) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => {}
        }
    }

    fn f1(self) -> Option<f64> {
        let denom = 2 * self.tp + self.fp + self.fn_;
        (denom > 0).then(|| (2 * self.tp) as f64 / denom as f64)
    }
}

fn check_signs(pred: &Matrix, truth: &Matrix) -> Result<()> {
    if pred.shape() != truth.shape() {
        return Err(Error::shape(format!(
            "predictions are {:?}, truth is {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    if pred.iter().chain(truth.iter()).any(|&t| t != 1.0 && t != -1.0) {
        return Err(Error::Domain("label entries must be +1 or -1".into()));
    }
    Ok(())
}

fn mean_f1(units: impl Iterator<Item = Counts>) -> F1Score {
    let (mut sum, mut count, mut vacuous) = (0.0, 0, 0);
    for c in units {
        count += 1;
        match c.f1() {
            Some(v) => sum += v,
            None => {
                sum += 1.0;
                vacuous += 1;
            }
        }
    }
    F1Score {
        value: if count == 0 { 1.0 } else { sum / count as f64 },
        vacuous,
    }
}

pub fn macro_f1_detailed(pred: &Matrix, truth: &Matrix) -> Result<F1Score> {
    check_signs(pred, truth)?;
    Ok(mean_f1((0..pred.nrows()).map(|i| {
        let mut c = Counts::default();
        for j in 0..pred.ncols() {
            c.add(pred[(i, j)], truth[(i, j)]);
        }
        c
    })))
}

/// Per-label F1 averaged over labels.
pub fn macro_f1(pred: &Matrix, truth: &Matrix) -> Result<f64> {
    macro_f1_detailed(pred, truth).map(|f| f.value)
}

/// F1 of the true/false positive counts pooled over every cell.
pub fn micro_f1(pred: &Matrix, truth: &Matrix) -> Result<f64> {
    check_signs(pred, truth)?;
    let mut c = Counts::default();
    for (&p, &t) in pred.iter().zip(truth.iter()) {
        c.add(p, t);
    }
    Ok(c.f1().unwrap_or(1.0))
}

pub fn instance_f1_detailed(pred: &Matrix, truth: &Matrix) -> Result<F1Score> {
    check_signs(pred, truth)?;
    Ok(mean_f1((0..pred.ncols()).map(|j| {
        let mut c = Counts::default();
        for i in 0..pred.nrows() {
            c.add(pred[(i, j)], truth[(i, j)]);
        }
        c
    })))
}

/// Per-instance F1 averaged over instances.
pub fn instance_f1(pred: &Matrix, truth: &Matrix) -> Result<f64> {
    instance_f1_detailed(pred, truth).map(|f| f.value)
}

/// All seven metrics for one score matrix, thresholding scores at zero for
/// the F1 family. Skip and vacuous counts are recorded as report notes.
pub fn evaluate(scores: &Matrix, truth: &Matrix) -> Result<MetricsReport> {
    let pred = crate::model::predict_labels(scores);
    let rkl = ranking_loss_detailed(scores, truth)?;
    let cov = coverage_detailed(scores, truth)?;
    let auc = avg_auc_detailed(scores, truth)?;
    let iauc = instance_auc_detailed(scores, truth)?;
    let macro_ = macro_f1_detailed(&pred, truth)?;
    let micro = micro_f1(&pred, truth)?;
    let inst = instance_f1_detailed(&pred, truth)?;

    let values = [
        (Metric::RankingLoss, rkl.value),
        (Metric::Coverage, cov.value),
        (Metric::AvgAuc, auc.value),
        (Metric::InstanceAuc, iauc.value),
        (Metric::MacroF1, macro_.value),
        (Metric::MicroF1, micro),
        (Metric::InstanceF1, inst.value),
    ];
    let notes = vec![
        ("labels".to_string(), truth.nrows().to_string()),
        ("instances".to_string(), truth.ncols().to_string()),
        ("skipped_instances_ranking".to_string(), rkl.skipped.to_string()),
        ("skipped_instances_coverage".to_string(), cov.skipped.to_string()),
        ("skipped_labels_auc".to_string(), auc.skipped.to_string()),
        ("skipped_instances_auc".to_string(), iauc.skipped.to_string()),
        ("vacuous_labels_f1".to_string(), macro_.vacuous.to_string()),
        ("vacuous_instances_f1".to_string(), inst.vacuous.to_string()),
    ];
    Ok(MetricsReport::single(&values, notes))
}
