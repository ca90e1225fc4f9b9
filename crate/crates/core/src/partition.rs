//! Instance groups for the local correlation terms.
//!
//! Groups come from k-means on the feature columns (Lloyd iterations from a
//! seeded k-means++ start) or from an externally supplied assignment file.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::MultiLabelDataset;
use crate::error::{Error, Result};
use crate::Matrix;

/// Assignment of `n` instances to `g` nonempty groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPartition {
    assignment: Vec<usize>,
    sizes: Vec<usize>,
}

impl GroupPartition {
    pub fn new(assignment: Vec<usize>, g: usize) -> Result<Self> {
        if g == 0 {
            return Err(Error::config("partition needs at least one group"));
        }
        let mut sizes = vec![0; g];
        for &b in &assignment {
            if b >= g {
                return Err(Error::Range(format!("group {b} with g = {g}")));
            }
            sizes[b] += 1;
        }
        if let Some(b) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::Invariant(format!("group {b} is empty")));
        }
        Ok(Self { assignment, sizes })
    }

    /// Every instance in group 0.
    pub fn single(n: usize) -> Result<Self> {
        Self::new(vec![0; n], 1)
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_groups(&self) -> usize {
        self.sizes.len()
    }

    pub fn n_instances(&self) -> usize {
        self.assignment.len()
    }

    /// Ascending instance indices of group `b`.
    pub fn members(&self, b: usize) -> Result<Vec<usize>> {
        if b >= self.n_groups() {
            return Err(Error::Range(format!("group {b} with g = {}", self.n_groups())));
        }
        Ok(self
            .assignment
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == b)
            .map(|(j, _)| j)
            .collect())
    }

    /// One `instance_idx,group_idx` line per instance.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for (j, b) in self.assignment.iter().enumerate() {
            writeln!(out, "{j},{b}")?;
        }
        Ok(())
    }

    /// Reads the format of [`GroupPartition::write`]; `g` is inferred as one
    /// past the largest group id. Every instance `0..n` must appear once.
    pub fn read<R: BufRead>(input: R, n: usize) -> Result<Self> {
        let mut assignment = vec![None; n];
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = idx + 1;
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(lineno, "expected instance_idx,group_idx"))?;
            let j: usize = a
                .trim()
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad instance index {a:?}")))?;
            let b: usize = b
                .trim()
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad group index {b:?}")))?;
            let slot = assignment
                .get_mut(j)
                .ok_or_else(|| Error::Range(format!("line {lineno}: instance {j} >= n = {n}")))?;
            if slot.replace(b).is_some() {
                return Err(Error::parse(lineno, format!("instance {j} assigned twice")));
            }
        }
        let assignment = assignment
            .into_iter()
            .enumerate()
            .map(|(j, b)| b.ok_or_else(|| Error::Invariant(format!("instance {j} unassigned"))))
            .collect::<Result<Vec<_>>>()?;
        let g = assignment.iter().max().map_or(1, |m| m + 1);
        Self::new(assignment, g)
    }
}

/// Column indices of group `b`, ascending.
pub fn group_columns(
    ds: &MultiLabelDataset,
    part: &GroupPartition,
    b: usize,
) -> Result<Vec<usize>> {
    if part.n_instances() != ds.n_instances() {
        return Err(Error::shape(format!(
            "partition covers {} instances, dataset has {}",
            part.n_instances(),
            ds.n_instances()
        )));
    }
    part.members(b)
}

/// Result of [`kmeans_detailed`].
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub partition: GroupPartition,
    pub centers: Matrix,
    /// Sum of squared distances after every assignment step.
    pub inertia: Vec<f64>,
    pub iterations: usize,
}

pub fn kmeans(features: &Matrix, g: usize, seed: u64, max_iters: usize) -> Result<GroupPartition> {
    kmeans_detailed(features, g, seed, max_iters).map(|fit| fit.partition)
}

pub fn kmeans_detailed(
    features: &Matrix,
    g: usize,
    seed: u64,
    max_iters: usize,
) -> Result<KMeansFit> {
    let n = features.ncols();
    if g == 0 || g > n {
        return Err(Error::config(format!("cannot form {g} groups from {n} instances")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus_init(features, g, &mut rng);

    let mut assignment = vec![0; n];
    let mut dist = vec![0.0; n];
    assign(features, &centers, &mut assignment, &mut dist);
    reseed_empty(features, &mut centers, &mut assignment, &mut dist);
    let mut inertia = vec![dist.iter().sum()];

    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        update_centers(features, &assignment, &mut centers);
        let mut next = assignment.clone();
        assign(features, &centers, &mut next, &mut dist);
        reseed_empty(features, &mut centers, &mut next, &mut dist);
        inertia.push(dist.iter().sum());
        if next == assignment {
            break;
        }
        assignment = next;
    }

    Ok(KMeansFit {
        partition: GroupPartition::new(assignment, g)?,
        centers,
        inertia,
        iterations,
    })
}

fn sq_dist(features: &Matrix, j: usize, centers: &Matrix, c: usize) -> f64 {
    features
        .column(j)
        .iter()
        .zip(centers.column(c).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn plus_plus_init(features: &Matrix, g: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = features.ncols();
    let mut centers = Matrix::zeros(features.nrows(), g);
    let first = rng.random_range(0..n);
    centers.set_column(0, &features.column(first));
    let mut best: Vec<f64> = (0..n).map(|j| sq_dist(features, j, &centers, 0)).collect();
    for c in 1..g {
        let total: f64 = best.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (j, &w) in best.iter().enumerate() {
                acc += w;
                if acc > target {
                    chosen = j;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.set_column(c, &features.column(pick));
        for (j, b) in best.iter_mut().enumerate() {
            *b = b.min(sq_dist(features, j, &centers, c));
        }
    }
    centers
}

/// Nearest-center assignment; ties go to the lower center index.
fn assign(features: &Matrix, centers: &Matrix, assignment: &mut [usize], dist: &mut [f64]) {
    for j in 0..features.ncols() {
        let mut best = (0, f64::INFINITY);
        for c in 0..centers.ncols() {
            let d = sq_dist(features, j, centers, c);
            if d < best.1 {
                best = (c, d);
            }
        }
        assignment[j] = best.0;
        dist[j] = best.1;
    }
}

/// Moves each empty cluster's center onto the point farthest from its own
/// center, taken from a cluster that can spare it.
fn reseed_empty(
    features: &Matrix,
    centers: &mut Matrix,
    assignment: &mut [usize],
    dist: &mut [f64],
) {
    let g = centers.ncols();
    let mut sizes = vec![0usize; g];
    for &a in assignment.iter() {
        sizes[a] += 1;
    }
    for c in 0..g {
        if sizes[c] > 0 {
            continue;
        }
        let donor = (0..assignment.len())
            .filter(|&j| sizes[assignment[j]] > 1)
            .fold(None, |acc: Option<usize>, j| match acc {
                Some(b) if dist[b] >= dist[j] => Some(b),
                _ => Some(j),
            });
        let Some(j) = donor else { continue };
        sizes[assignment[j]] -= 1;
        sizes[c] = 1;
        assignment[j] = c;
        dist[j] = 0.0;
        centers.set_column(c, &features.column(j));
    }
}

fn update_centers(features: &Matrix, assignment: &[usize], centers: &mut Matrix) {
    let g = centers.ncols();
    let mut sums = Matrix::zeros(features.nrows(), g);
    let mut counts = vec![0usize; g];
    for (j, &a) in assignment.iter().enumerate() {
        let mut col = sums.column_mut(a);
        col += features.column(j);
        counts[a] += 1;
    }
    for c in 0..g {
        if counts[c] > 0 {
            centers.set_column(c, &(sums.column(c) / counts[c] as f64));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};
    use rand_distr::StandardNormal;

    fn clouds(per: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 2 * per;
        let truth: Vec<usize> = (0..n).map(|j| (j * 7 + j / 3) % 2).collect();
        let x = Matrix::from_fn(3, n, |_, j| {
            let offset = if truth[j] == 0 { -50.0 } else { 50.0 };
            offset + rng.sample::<f64, _>(StandardNormal)
        });
        (x, truth)
    }

    #[test]
    fn single_group() {
        let (x, _) = clouds(5, 1);
        let p = kmeans(&x, 1, 3, 10).unwrap();
        assert_eq!(p.assignment(), &[0; 10]);
        assert_eq!(p.sizes(), &[10]);
    }

    #[test]
    fn recovers_separated_clouds() {
        let (x, truth) = clouds(20, 2);
        let p = kmeans(&x, 2, 11, 50).unwrap();
        let same = p.assignment().iter().zip(&truth).all(|(a, t)| a == t);
        let flipped = p.assignment().iter().zip(&truth).all(|(a, t)| *a == 1 - t);
        assert!(same || flipped);
    }

    #[test]
    fn deterministic_per_seed() {
        let (x, _) = clouds(15, 3);
        assert_eq!(kmeans(&x, 3, 5, 20).unwrap(), kmeans(&x, 3, 5, 20).unwrap());
    }

    #[test]
    fn too_many_groups() {
        let x = Matrix::zeros(2, 3);
        assert!(matches!(kmeans(&x, 4, 0, 5), Err(Error::Config(_))));
    }

    #[test]
    fn duplicate_points_still_fill_every_group() {
        let x = Matrix::from_element(2, 6, 1.0);
        let p = kmeans(&x, 3, 0, 5).unwrap();
        assert!(p.sizes().iter().all(|&s| s > 0));
    }

    #[test]
    fn group_columns_examples() {
        let ds = MultiLabelDataset::new(Matrix::zeros(1, 3), Matrix::from_element(1, 3, 1.0)).unwrap();
        let p = GroupPartition::new(vec![0, 1, 0], 2).unwrap();
        assert_eq!(group_columns(&ds, &p, 0).unwrap(), vec![0, 2]);
        assert_eq!(group_columns(&ds, &p, 1).unwrap(), vec![1]);
        assert!(matches!(group_columns(&ds, &p, 2), Err(Error::Range(_))));
        let one = GroupPartition::single(3).unwrap();
        assert_eq!(group_columns(&ds, &one, 0).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn file_round_trip() {
        let p = GroupPartition::new(vec![1, 0, 2, 1], 3).unwrap();
        let mut buf = Vec::new();
        p.write(&mut buf).unwrap();
        assert_eq!(GroupPartition::read(&buf[..], 4).unwrap(), p);
        assert!(GroupPartition::read(&b"0,0\n"[..], 2).is_err());
    }

    proptest! {
        #[test]
        fn inertia_never_increases(seed in 0u64..1000, g in 1usize..5, n in 5usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Matrix::from_fn(2, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let fit = kmeans_detailed(&x, g, seed, 100).unwrap();
            for w in fit.inertia.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
            }
            let mut seen = vec![0; n];
            for b in 0..g {
                for j in fit.partition.members(b).unwrap() {
                    seen[j] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }
    }
}
