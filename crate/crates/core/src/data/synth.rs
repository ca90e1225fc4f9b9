//! Synthetic multi-label data with planted low-rank structure and label noise
//! concentrated on a subset of "hard" instances.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::MultiLabelDataset;
use crate::error::{Error, Result};
use crate::Matrix;

const CENTER_SCALE: f64 = 3.0;
const LATENT_NOISE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub d: usize,
    pub n: usize,
    pub l: usize,
    pub k: usize,
    pub g: usize,
    pub noise_rate: f64,
    pub hard_fraction: f64,
    pub seed: u64,
}

/// Generated dataset together with the planted ground truth.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub dataset: MultiLabelDataset,
    /// `sign(U*V*)` before any flips.
    pub clean_labels: Matrix,
    /// Ascending indices of the instances that received label noise.
    pub hard_instances: Vec<usize>,
    /// Generating cluster of every instance.
    pub groups: Vec<usize>,
    pub flips: usize,
    pub u: Matrix,
    pub v: Matrix,
    pub w: Matrix,
}

pub fn synthesize(cfg: &SynthConfig) -> Result<Synthetic> {
    let SynthConfig {
        d,
        n,
        l,
        k,
        g,
        noise_rate,
        hard_fraction,
        seed,
    } = *cfg;
    if d == 0 || n == 0 || l == 0 || k == 0 || g == 0 {
        return Err(Error::config("d, n, l, k and g must all be at least 1"));
    }
    if k > d.min(l) {
        return Err(Error::config(format!("k = {k} exceeds min(d, l) = {}", d.min(l))));
    }
    if g > n {
        return Err(Error::config(format!("g = {g} exceeds n = {n}")));
    }
    for (name, v) in [("noise_rate", noise_rate), ("hard_fraction", hard_fraction)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::config(format!("{name} = {v} outside [0, 1]")));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };

    let centers = Matrix::from_fn(d, g, |_, _| CENTER_SCALE * gauss(&mut rng));
    let mut groups: Vec<usize> = (0..n).map(|j| j % g).collect();
    groups.shuffle(&mut rng);
    let features = Matrix::from_fn(d, n, |i, j| centers[(i, groups[j])] + gauss(&mut rng));

    let w = Matrix::from_fn(d, k, |_, _| gauss(&mut rng) / (d as f64).sqrt());
    let u = Matrix::from_fn(l, k, |_, _| gauss(&mut rng));
    let mut v = w.transpose() * &features;
    for x in v.iter_mut() {
        *x += LATENT_NOISE * gauss(&mut rng);
    }
    let clean_labels = (&u * &v).map(|s| if s >= 0.0 { 1.0 } else { -1.0 });

    let n_hard = (hard_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut hard_instances = order[..n_hard].to_vec();
    hard_instances.sort_unstable();

    let mut labels = clean_labels.clone();
    let mut flips = 0;
    for &j in &hard_instances {
        for i in 0..l {
            if rng.random::<f64>() < noise_rate {
                labels[(i, j)] = -labels[(i, j)];
                flips += 1;
            }
        }
    }

    Ok(Synthetic {
        dataset: MultiLabelDataset::new(features, labels)?,
        clean_labels,
        hard_instances,
        groups,
        flips,
        u,
        v,
        w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SynthConfig {
        SynthConfig {
            d: 20,
            n: 200,
            l: 10,
            k: 3,
            g: 2,
            noise_rate: 0.3,
            hard_fraction: 0.2,
            seed: 1,
        }
    }

    fn count_flips(s: &Synthetic) -> usize {
        s.dataset
            .labels()
            .iter()
            .zip(s.clean_labels.iter())
            .filter(|(a, b)| a != b)
            .count()
    }

    #[test]
    fn noiseless_labels_are_signs() {
        let s = synthesize(&SynthConfig {
            noise_rate: 0.0,
            ..cfg()
        })
        .unwrap();
        assert_eq!(s.dataset.labels(), &s.clean_labels);
        let signs = (&s.u * &s.v).map(|x| if x >= 0.0 { 1.0 } else { -1.0 });
        assert_eq!(signs, s.clean_labels);
    }

    #[test]
    fn no_hard_instances_means_no_flips() {
        let s = synthesize(&SynthConfig {
            hard_fraction: 0.0,
            noise_rate: 0.9,
            ..cfg()
        })
        .unwrap();
        assert_eq!(s.flips, 0);
        assert_eq!(count_flips(&s), 0);
    }

    #[test]
    fn flip_count_near_expectation() {
        let s = synthesize(&cfg()).unwrap();
        assert_eq!(s.hard_instances.len(), 40);
        let flips = count_flips(&s);
        assert_eq!(flips, s.flips);
        // 400 Bernoulli(0.3) trials: mean 120, sd ~9.2
        let sd = (400.0f64 * 0.3 * 0.7).sqrt();
        assert!((flips as f64 - 120.0).abs() <= 4.0 * sd, "flips = {flips}");
        // flips only on hard instances
        for j in 0..200 {
            let differs = (0..10).any(|i| s.dataset.labels()[(i, j)] != s.clean_labels[(i, j)]);
            if differs {
                assert!(s.hard_instances.binary_search(&j).is_ok());
            }
        }
    }

    #[test]
    fn k_too_large() {
        let err = synthesize(&SynthConfig { k: 11, ..cfg() }).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn deterministic() {
        let a = synthesize(&cfg()).unwrap();
        let b = synthesize(&cfg()).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.hard_instances, b.hard_instances);
    }
}
