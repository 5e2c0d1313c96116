//! Feature sets, label spaces, pool bookkeeping and round configuration.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Embedding matrix plus the external id of each row.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    matrix: Matrix,
    sample_ids: Vec<u64>,
}

impl FeatureSet {
    pub fn new(matrix: Matrix, sample_ids: Vec<u64>) -> Result<Self> {
        if matrix.rows() == 0 || matrix.cols() == 0 {
            return Err(Error::invalid(
                "feature set",
                "need at least one sample and one dimension",
            ));
        }
        if sample_ids.len() != matrix.rows() {
            return Err(Error::invalid(
                "feature set",
                format!("{} ids for {} rows", sample_ids.len(), matrix.rows()),
            ));
        }
        if let Some(pos) = matrix.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "feature set",
                format!("non-finite value in row {}", pos / matrix.cols()),
            ));
        }
        let mut seen = HashSet::with_capacity(sample_ids.len());
        for id in &sample_ids {
            if !seen.insert(*id) {
                return Err(Error::invalid(
                    "feature set",
                    format!("duplicate sample id {id}"),
                ));
            }
        }
        Ok(Self { matrix, sample_ids })
    }

    /// Features with ids `0..n`.
    pub fn from_matrix(matrix: Matrix) -> Result<Self> {
        let ids = (0..matrix.rows() as u64).collect();
        Self::new(matrix, ids)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn sample_ids(&self) -> &[u64] {
        &self.sample_ids
    }

    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }
}

/// Known classes are `0..k`; simulated unknown classes are `k..k + u_true`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    pub k: usize,
    pub u_true: Option<usize>,
}

impl LabelSpace {
    pub fn new(k: usize, u_true: Option<usize>) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid(
                "label space",
                format!("k = {k}, need k >= 2"),
            ));
        }
        if u_true == Some(0) {
            return Err(Error::invalid(
                "label space",
                "u_true must be >= 1 when present",
            ));
        }
        Ok(Self { k, u_true })
    }

    pub fn is_known(&self, true_class: usize) -> bool {
        true_class < self.k
    }
}

/// What the annotator reveals for a queried sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueryLabel {
    Known(usize),
    /// Collapsed label; the true unknown class is never revealed.
    Unknown,
}

impl QueryLabel {
    pub fn is_known(&self) -> bool {
        matches!(self, QueryLabel::Known(_))
    }
}

/// Fraction of a queried batch that belongs to known classes.
pub fn observed_precision(batch: &[QueryLabel]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let known = batch.iter().filter(|l| l.is_known()).count();
    Ok(known as f64 / batch.len() as f64)
}

/// Partition of row indices into labeled-known, labeled-unknown and unlabeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolState {
    k: usize,
    labeled_known: BTreeMap<usize, usize>,
    labeled_unknown: BTreeSet<usize>,
    unlabeled: BTreeSet<usize>,
    round: usize,
}

impl PoolState {
    /// Starts at round 0 with the given initial known labels; every other
    /// index in `pool` is unlabeled.
    pub fn new(k: usize, pool: &[usize], initial_known: &[(usize, usize)]) -> Result<Self> {
        let mut unlabeled: BTreeSet<usize> = BTreeSet::new();
        for &i in pool {
            if !unlabeled.insert(i) {
                return Err(Error::invalid("pool", format!("duplicate index {i}")));
            }
        }
        let mut labeled_known = BTreeMap::new();
        for &(i, c) in initial_known {
            if c >= k {
                return Err(Error::invalid(
                    "pool",
                    format!("class {c} outside [0, {k})"),
                ));
            }
            if !unlabeled.remove(&i) {
                return Err(Error::invalid(
                    "pool",
                    format!("initial index {i} not in pool"),
                ));
            }
            labeled_known.insert(i, c);
        }
        Ok(Self {
            k,
            labeled_known,
            labeled_unknown: BTreeSet::new(),
            unlabeled,
            round: 0,
        })
    }

    pub fn known_classes(&self) -> usize {
        self.k
    }

    pub fn labeled_known(&self) -> &BTreeMap<usize, usize> {
        &self.labeled_known
    }

    pub fn labeled_unknown(&self) -> &BTreeSet<usize> {
        &self.labeled_unknown
    }

    pub fn unlabeled(&self) -> &BTreeSet<usize> {
        &self.unlabeled
    }

    pub fn unlabeled_indices(&self) -> Vec<usize> {
        self.unlabeled.iter().copied().collect()
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn labeled_len(&self) -> usize {
        self.labeled_known.len() + self.labeled_unknown.len()
    }

    /// Moves queried indices out of the unlabeled set according to the
    /// annotator's answers and advances the round. Validation happens before
    /// any mutation, so a failed call leaves the state untouched.
    pub fn apply_query_result(&mut self, answers: &[(usize, QueryLabel)]) -> Result<()> {
        let mut seen = HashSet::with_capacity(answers.len());
        for &(i, label) in answers {
            if !self.unlabeled.contains(&i) || !seen.insert(i) {
                return Err(Error::NotQueryable(i));
            }
            if let QueryLabel::Known(c) = label {
                if c >= self.k {
                    return Err(Error::invalid(
                        "query label",
                        format!("class {c} outside [0, {})", self.k),
                    ));
                }
            }
        }
        for &(i, label) in answers {
            self.unlabeled.remove(&i);
            match label {
                QueryLabel::Known(c) => {
                    self.labeled_known.insert(i, c);
                }
                QueryLabel::Unknown => {
                    self.labeled_unknown.insert(i);
                }
            }
        }
        self.round += 1;
        Ok(())
    }
}

/// Per-round hyperparameters. Field names are the JSON config keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoundConfig {
    pub budget: usize,
    pub target_precision: f64,
    pub u_max: usize,
    pub rounds: usize,
    pub gamma: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub momentum: f64,
    /// Learning rate is multiplied by `lr_decay` every `lr_decay_every` epochs.
    pub lr_decay_every: usize,
    pub lr_decay: f64,
    pub hidden_dim: usize,
    /// Auxiliary logits are clamped to `[-logit_clamp, logit_clamp]` before
    /// exponentiation.
    pub logit_clamp: f64,
    pub kmeans_restarts: usize,
    pub seed: u64,
}

impl Default for RoundConfig {
    fn default() -> Self {
        Self {
            budget: 150,
            target_precision: 0.6,
            u_max: 100,
            rounds: 10,
            gamma: 1.0,
            epochs: 60,
            learning_rate: 0.05,
            batch_size: 128,
            weight_decay: 5e-3,
            momentum: 0.9,
            lr_decay_every: 40,
            lr_decay: 0.1,
            hidden_dim: 256,
            logit_clamp: 30.0,
            kmeans_restarts: 1,
            seed: 1,
        }
    }
}

impl RoundConfig {
    pub fn validate(&self, k: usize) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid("round config", reason));
        if !(self.target_precision > 0.0 && self.target_precision <= 1.0) {
            return bad(format!(
                "target_precision {} not in (0, 1]",
                self.target_precision
            ));
        }
        if self.budget == 0 {
            return bad("budget must be >= 1".into());
        }
        if self.u_max <= k {
            return bad(format!("u_max {} must exceed k = {k}", self.u_max));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma {} must be positive", self.gamma));
        }
        if self.batch_size == 0 || self.hidden_dim == 0 || self.kmeans_restarts == 0 {
            return bad("batch_size, hidden_dim and kmeans_restarts must be >= 1".into());
        }
        if !(self.learning_rate > 0.0) || !(self.logit_clamp > 0.0) {
            return bad("learning_rate and logit_clamp must be positive".into());
        }
        if !(0.0..1.0).contains(&self.momentum) || self.weight_decay < 0.0 {
            return bad("momentum must be in [0, 1) and weight_decay >= 0".into());
        }
        Ok(())
    }
}

/// One row of the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub test_accuracy: f64,
    pub observed_precision: f64,
    pub u_hat: usize,
    pub pool_size: usize,
    pub calibrated_precision: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observed_precision_ratios() {
        let mut batch = vec![QueryLabel::Known(0); 9];
        batch.extend(vec![QueryLabel::Unknown; 6]);
        assert_eq!(observed_precision(&batch).unwrap(), 0.6);
        assert_eq!(observed_precision(&[QueryLabel::Unknown; 10]).unwrap(), 0.0);
        assert_eq!(
            observed_precision(&[QueryLabel::Known(1); 15]).unwrap(),
            1.0
        );
        assert!(matches!(observed_precision(&[]), Err(Error::EmptyBatch)));
    }

    #[test]
    fn apply_query_moves_indices() {
        let pool: Vec<usize> = (0..10).collect();
        let mut s = PoolState::new(3, &pool, &[(0, 1)]).unwrap();
        s.apply_query_result(&[(3, QueryLabel::Known(2)), (7, QueryLabel::Unknown)])
            .unwrap();
        assert_eq!(s.labeled_known().get(&3), Some(&2));
        assert!(s.labeled_unknown().contains(&7));
        assert!(!s.unlabeled().contains(&3) && !s.unlabeled().contains(&7));
        assert_eq!(s.round(), 1);
    }

    #[test]
    fn empty_query_only_advances_round() {
        let pool: Vec<usize> = (0..5).collect();
        let mut s = PoolState::new(2, &pool, &[]).unwrap();
        let before = s.clone();
        s.apply_query_result(&[]).unwrap();
        assert_eq!(s.round(), 1);
        assert_eq!(s.unlabeled(), before.unlabeled());
        assert_eq!(s.labeled_len(), 0);
    }

    #[test]
    fn rejects_non_queryable() {
        let pool: Vec<usize> = (0..5).collect();
        let mut s = PoolState::new(2, &pool, &[(1, 0)]).unwrap();
        let before = s.clone();
        assert!(matches!(
            s.apply_query_result(&[(2, QueryLabel::Unknown), (1, QueryLabel::Unknown)]),
            Err(Error::NotQueryable(1))
        ));
        assert!(matches!(
            s.apply_query_result(&[(9, QueryLabel::Unknown)]),
            Err(Error::NotQueryable(9))
        ));
        assert!(matches!(
            s.apply_query_result(&[(2, QueryLabel::Unknown), (2, QueryLabel::Unknown)]),
            Err(Error::NotQueryable(2))
        ));
        assert_eq!(s, before);
    }

    #[test]
    fn large_batch_counts() {
        let pool: Vec<usize> = (0..3000).collect();
        let mut s = PoolState::new(5, &pool, &[]).unwrap();
        let answers: Vec<_> = (0..1500)
            .map(|i| {
                if i % 5 < 3 {
                    (i, QueryLabel::Known(i % 5))
                } else {
                    (i, QueryLabel::Unknown)
                }
            })
            .collect();
        s.apply_query_result(&answers).unwrap();
        assert_eq!(s.labeled_known().len(), 900);
        assert_eq!(s.labeled_unknown().len(), 600);
        assert_eq!(s.unlabeled().len(), 1500);
    }

    #[test]
    fn feature_set_validation() {
        let m = Matrix::from_rows(&[[0.0, 1.0], [f64::NAN, 0.0]]);
        assert!(FeatureSet::from_matrix(m).is_err());
        let m = Matrix::from_rows(&[[0.0, 1.0], [2.0, 0.0]]);
        assert!(FeatureSet::new(m.clone(), vec![4, 4]).is_err());
        assert!(FeatureSet::new(m, vec![4, 5]).is_ok());
    }

    #[test]
    fn config_validation() {
        let c = RoundConfig::default();
        assert!(c.validate(20).is_ok());
        assert!(RoundConfig {
            u_max: 20,
            ..c.clone()
        }
        .validate(20)
        .is_err());
        assert!(RoundConfig {
            target_precision: 0.0,
            ..c.clone()
        }
        .validate(5)
        .is_err());
        assert!(RoundConfig {
            gamma: 0.0,
            ..c.clone()
        }
        .validate(5)
        .is_err());
        assert!(RoundConfig { budget: 0, ..c }.validate(5).is_err());
        assert!(LabelSpace::new(1, None).is_err());
        assert!(LabelSpace::new(2, Some(0)).is_err());
    }
}
