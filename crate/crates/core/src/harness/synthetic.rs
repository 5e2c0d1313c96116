//! Gaussian-blob open-set benchmarks and the dataset wrapper shared with
//! file-backed runs.

use rand::seq::index::sample;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{FeatureSet, PoolState};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Pool,
    Test,
}

/// Parameters of a synthetic open-set benchmark. Classes are isotropic unit
/// Gaussians; `cluster_separation` is the mean pairwise centroid distance in
/// units of the within-class standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub known_classes: usize,
    pub unknown_classes: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    pub cluster_separation: f64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_seed() -> u64 {
    1
}

impl SyntheticSpec {
    /// 20 known and 30 unknown classes in 32 dimensions, 200 samples each,
    /// at 5σ separation (nearest-true-centroid accuracy on the known classes
    /// is about 0.91, so learning curves do not saturate).
    pub fn reference() -> Self {
        Self {
            known_classes: 20,
            unknown_classes: 30,
            dim: 32,
            samples_per_class: 200,
            cluster_separation: 5.0,
            test_fraction: 0.2,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |r: String| Err(Error::invalid("synthetic spec", r));
        if self.known_classes < 2 {
            return bad(format!("known_classes {} < 2", self.known_classes));
        }
        if self.dim == 0 || self.samples_per_class < 2 {
            return bad("dim must be >= 1 and samples_per_class >= 2".into());
        }
        if !(self.cluster_separation > 0.0 && self.cluster_separation.is_finite()) {
            return bad(format!(
                "cluster_separation {} must be positive",
                self.cluster_separation
            ));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!(
                "test_fraction {} not in (0, 1)",
                self.test_fraction
            ));
        }
        let n_test = (self.samples_per_class as f64 * self.test_fraction).round() as usize;
        if n_test == 0 || n_test >= self.samples_per_class {
            return bad("test_fraction leaves an empty pool or test split per class".into());
        }
        if self.dim == 1 && self.known_classes + self.unknown_classes > 2 {
            return bad(
                "one dimension cannot hold more than two equidistant centroids on a sphere".into(),
            );
        }
        Ok(())
    }
}

/// Features with ground truth and a pool/test split.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: FeatureSet,
    /// Known classes are `0..k`, anything else is unknown.
    pub true_class: Vec<usize>,
    pub split: Vec<Split>,
    pub k: usize,
}

impl Dataset {
    pub fn new(
        features: FeatureSet,
        true_class: Vec<usize>,
        split: Vec<Split>,
        k: usize,
    ) -> Result<Self> {
        if true_class.len() != features.len() || split.len() != features.len() {
            return Err(Error::invalid(
                "dataset",
                "labels and split must cover every feature row",
            ));
        }
        if k < 2 {
            return Err(Error::invalid("dataset", format!("k = {k}, need >= 2")));
        }
        Ok(Self {
            features,
            true_class,
            split,
            k,
        })
    }

    pub fn pool_rows(&self) -> Vec<usize> {
        (0..self.split.len())
            .filter(|&i| self.split[i] == Split::Pool)
            .collect()
    }

    /// Known-class test rows and their labels.
    pub fn test_split(&self) -> (Vec<usize>, Vec<usize>) {
        let rows: Vec<usize> = (0..self.split.len())
            .filter(|&i| self.split[i] == Split::Test && self.true_class[i] < self.k)
            .collect();
        let labels = rows.iter().map(|&i| self.true_class[i]).collect();
        (rows, labels)
    }

    /// Pool state with `initial_fraction` of the known-class pool rows
    /// labeled (at least one), drawn with the run seed.
    pub fn initial_state(&self, initial_fraction: f64, seed: u64) -> Result<PoolState> {
        if !(initial_fraction > 0.0 && initial_fraction < 1.0) {
            return Err(Error::invalid(
                "initial_fraction",
                format!("{initial_fraction} not in (0, 1)"),
            ));
        }
        let pool = self.pool_rows();
        let known: Vec<usize> = pool
            .iter()
            .copied()
            .filter(|&i| self.true_class[i] < self.k)
            .collect();
        if known.is_empty() {
            return Err(Error::invalid(
                "dataset",
                "no known-class samples in the pool",
            ));
        }
        let n = ((known.len() as f64 * initial_fraction).round() as usize).clamp(1, known.len());
        let mut g = rng::stream(seed, 0, rng::tag::INITIAL_POOL);
        let mut picked: Vec<usize> = sample(&mut g, known.len(), n)
            .into_iter()
            .map(|j| known[j])
            .collect();
        picked.sort_unstable();
        let initial: Vec<(usize, usize)> =
            picked.iter().map(|&i| (i, self.true_class[i])).collect();
        PoolState::new(self.k, &pool, &initial)
    }
}

/// Draws `k + u` Gaussian classes. Centroids are random directions scaled so
/// their mean pairwise distance equals the requested separation; within each
/// class the first `round(test_fraction · n)` samples form the test split.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let classes = spec.known_classes + spec.unknown_classes;
    let dim = spec.dim;
    let mut g = rng::stream(spec.seed, 0, rng::tag::SYNTHETIC);

    let mut centroids = Matrix::zeros(classes, dim);
    for c in 0..classes {
        if dim == 1 {
            // the only unit directions are +1 and -1
            centroids.set(c, 0, if c % 2 == 0 { 1.0 } else { -1.0 });
            continue;
        }
        loop {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut g)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                for (dst, x) in centroids.row_mut(c).iter_mut().zip(&v) {
                    *dst = x / norm;
                }
                break;
            }
        }
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for a in 0..classes {
        for b in a + 1..classes {
            total += crate::matrix::squared_distance(centroids.row(a), centroids.row(b)).sqrt();
            pairs += 1;
        }
    }
    if pairs > 0 {
        if total <= 0.0 {
            return Err(Error::invalid(
                "synthetic spec",
                "centroids collapsed; increase dim",
            ));
        }
        let scale = spec.cluster_separation / (total / pairs as f64);
        centroids
            .as_mut_slice()
            .iter_mut()
            .for_each(|v| *v *= scale);
    }

    let n = classes * spec.samples_per_class;
    let n_test = (spec.samples_per_class as f64 * spec.test_fraction).round() as usize;
    let mut data = Vec::with_capacity(n * dim);
    let mut true_class = Vec::with_capacity(n);
    let mut split = Vec::with_capacity(n);
    for c in 0..classes {
        for s in 0..spec.samples_per_class {
            for j in 0..dim {
                let z: f64 = StandardNormal.sample(&mut g);
                // stored as f32 on disk; round here so file round trips are exact
                data.push((centroids.get(c, j) + z) as f32 as f64);
            }
            true_class.push(c);
            split.push(if s < n_test { Split::Test } else { Split::Pool });
        }
    }
    let features = FeatureSet::from_matrix(Matrix::from_vec(n, dim, data))?;
    Dataset::new(features, true_class, split, spec.known_classes)
}
