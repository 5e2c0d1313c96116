//! Unknown-class estimation by label-guided clustering of the labeled pool.
//!
//! For each candidate surplus `m`, the labeled features are clustered into
//! `k + m` groups, the best `k + 1` clusters are aligned to the `k` known
//! classes plus one collapsed "unknown" class, every leftover cluster is read
//! as unknown, and the configuration is scored by the product of per-class F1.
//! A ternary search over `m` picks the best score; labeled unknowns are then
//! given proxy labels from their nearest unknown cluster.

mod hungarian;
mod kmeans;

use std::collections::BTreeMap;

pub use hungarian::hungarian_match;
pub use kmeans::{kmeans, ClusterAssignment, MAX_ITERATIONS};

use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};
use crate::rng;

/// Alignment of a clustering to the `k + 1` evaluation classes.
#[derive(Debug, Clone)]
pub struct F1Evaluation {
    /// Product of the per-class F1 values.
    pub score: f64,
    /// F1 per class; index `k` is the collapsed unknown class.
    pub per_class_f1: Vec<f64>,
    /// Class each cluster predicts (`k` = unknown).
    pub cluster_to_class: Vec<usize>,
}

fn column_key(column: &[usize], class: usize) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in column.iter().copied().chain([usize::MAX, class]) {
        for b in (v as u64).to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Scores a clustering against ground truth over `k` known classes plus the
/// unknown class `k`.
///
/// `k + 1` clusters are matched one-to-one to the classes by maximising
/// cluster/class overlap; the remaining clusters predict "unknown". F1 is
/// taken as 0 when precision + recall is 0.
pub fn f1_product_evaluate(
    assignments: &[usize],
    n_clusters: usize,
    labels: &[usize],
    k: usize,
) -> Result<F1Evaluation> {
    let n_classes = k + 1;
    if n_clusters < n_classes {
        return Err(Error::InsufficientClusters {
            needed: n_classes,
            got: n_clusters,
        });
    }
    if assignments.len() != labels.len() {
        return Err(Error::invalid(
            "evaluation input",
            format!(
                "{} assignments for {} labels",
                assignments.len(),
                labels.len()
            ),
        ));
    }
    let mut overlap = vec![vec![0usize; n_clusters]; n_classes];
    for (&a, &y) in assignments.iter().zip(labels) {
        if a >= n_clusters || y > k {
            return Err(Error::invalid(
                "evaluation input",
                format!("cluster {a} / class {y} out of range"),
            ));
        }
        overlap[y][a] += 1;
    }

    // Equal-overlap matchings can give different F1 products. A perturbation
    // keyed on each cluster's overlap column picks one of them without
    // depending on cluster ids; it sums to less than 1 so it never outranks
    // a real overlap difference.
    let eps = 0.5 / n_classes as f64;
    let mut cost = Matrix::zeros(n_classes, n_clusters);
    for c in 0..n_clusters {
        let column: Vec<usize> = overlap.iter().map(|row| row[c]).collect();
        for y in 0..n_classes {
            let jitter = column_key(&column, y) as f64 / u64::MAX as f64;
            cost.set(y, c, -(overlap[y][c] as f64) + eps * jitter);
        }
    }
    let (class_to_cluster, _) = hungarian_match(&cost)?;
    let mut cluster_to_class = vec![k; n_clusters];
    for (y, &c) in class_to_cluster.iter().enumerate() {
        cluster_to_class[c] = y;
    }

    let mut tp = vec![0usize; n_classes];
    let mut predicted = vec![0usize; n_classes];
    let mut actual = vec![0usize; n_classes];
    for (&a, &y) in assignments.iter().zip(labels) {
        let p = cluster_to_class[a];
        predicted[p] += 1;
        actual[y] += 1;
        if p == y {
            tp[y] += 1;
        }
    }
    let per_class_f1: Vec<f64> = (0..n_classes)
        .map(|c| {
            let denom = predicted[c] + actual[c];
            if tp[c] == 0 || denom == 0 {
                0.0
            } else {
                // 2PR / (P + R) = 2tp / (predicted + actual)
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .collect();
    Ok(F1Evaluation {
        score: per_class_f1.iter().product(),
        per_class_f1,
        cluster_to_class,
    })
}

/// Integer ternary search maximising `eval` over `lo..=hi`, with probes
/// `m1 = ⌊l + (r−l)/3⌋`, `m2 = ⌊r − (r−l)/3⌋` while `r − l > 2`, then an
/// exhaustive sweep of the residual interval. Each point is evaluated at
/// most once. Ties in the sweep go to the smallest argument.
pub fn ternary_search_max<F>(
    lo: usize,
    hi: usize,
    mut eval: F,
) -> Result<(usize, f64, BTreeMap<usize, f64>)>
where
    F: FnMut(usize) -> Result<f64>,
{
    if lo > hi {
        return Err(Error::invalid(
            "search bounds",
            format!("[{lo}, {hi}] is empty"),
        ));
    }
    let mut memo: BTreeMap<usize, f64> = BTreeMap::new();
    let mut score = |m: usize, memo: &mut BTreeMap<usize, f64>| -> Result<f64> {
        if let Some(&s) = memo.get(&m) {
            return Ok(s);
        }
        let s = eval(m)?;
        memo.insert(m, s);
        Ok(s)
    };

    let (mut l, mut r) = (lo, hi);
    while r - l > 2 {
        let third = (r - l) as f64 / 3.0;
        let m1 = (l as f64 + third).floor() as usize;
        let m2 = (r as f64 - third).floor() as usize;
        let s1 = score(m1, &mut memo)?;
        let s2 = score(m2, &mut memo)?;
        if s1 < s2 {
            l = m1;
        } else {
            r = m2;
        }
    }
    let mut best = (l, f64::NEG_INFINITY);
    for m in l..=r {
        let s = score(m, &mut memo)?;
        if s > best.1 {
            best = (m, s);
        }
    }
    Ok((best.0, best.1, memo))
}

/// Outcome of unknown-class estimation.
#[derive(Debug, Clone)]
pub struct EstimationResult {
    /// Estimated number of unknown classes.
    pub u_hat: usize,
    /// F1-product at the chosen `u_hat`.
    pub score: f64,
    /// Auxiliary class in `[k, k + u_hat)` for each labeled-unknown row, in
    /// the order those rows appear in the input.
    pub proxy_labels: Vec<usize>,
    /// Every `(m, score)` pair evaluated during the search.
    pub evaluations: BTreeMap<usize, f64>,
}

/// Search settings for [`estimate_unknown_classes`].
#[derive(Debug, Clone, Copy)]
pub struct EstimationConfig {
    pub k: usize,
    pub u_max: usize,
    pub restarts: usize,
    pub seed: u64,
    pub round: u64,
}

fn cluster_best_of(
    data: &Matrix,
    n_clusters: usize,
    cfg: &EstimationConfig,
    m: usize,
) -> Result<ClusterAssignment> {
    let mut best: Option<ClusterAssignment> = None;
    for restart in 0..cfg.restarts.max(1) {
        let sub = (m as u64) << 16 | restart as u64;
        let mut g = rng::substream(cfg.seed, cfg.round, rng::tag::KMEANS, sub);
        let run = kmeans(data, n_clusters, &mut g)?;
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Estimates the unknown-class count from the labeled pool.
///
/// `labels[i]` is the known class (`< k`) of row `i`, or `k` for a labeled
/// unknown. The search runs over `m ∈ [k + 1, min(u_max, n − k)]` and
/// clusters into `k + m` groups; the reported `u_hat` is the maximising `m`.
pub fn estimate_unknown_classes(
    features: &Matrix,
    labels: &[usize],
    cfg: &EstimationConfig,
) -> Result<EstimationResult> {
    let k = cfg.k;
    if labels.len() != features.rows() {
        return Err(Error::invalid(
            "estimation input",
            format!("{} labels for {} rows", labels.len(), features.rows()),
        ));
    }
    if !labels.contains(&k) {
        return Err(Error::NoLabeledUnknowns);
    }
    let lo = k + 1;
    let hi = cfg.u_max.min(features.rows().saturating_sub(k));
    if hi < lo {
        return Err(Error::invalid(
            "estimation bounds",
            format!(
                "need u_max > k and more than {} labeled samples (have {})",
                2 * k,
                features.rows()
            ),
        ));
    }

    let mut runs: BTreeMap<usize, (ClusterAssignment, F1Evaluation)> = BTreeMap::new();
    let (u_hat, score, evaluations) = ternary_search_max(lo, hi, |m| {
        let clusters = cluster_best_of(features, k + m, cfg, m)?;
        let eval = f1_product_evaluate(&clusters.assignments, k + m, labels, k)?;
        let s = eval.score;
        runs.insert(m, (clusters, eval));
        Ok(s)
    })?;

    let (clusters, eval) = &runs[&u_hat];
    let unknown_ids: Vec<usize> = (0..clusters.n_clusters())
        .filter(|&c| eval.cluster_to_class[c] == k)
        .collect();
    let unknown_centroids = clusters.centroids.select_rows(&unknown_ids);
    let unknown_rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == k).collect();
    let proxy_labels =
        assign_proxy_labels(&features.select_rows(&unknown_rows), &unknown_centroids, k)?;

    Ok(EstimationResult {
        u_hat,
        score,
        proxy_labels,
        evaluations,
    })
}

/// Nearest unknown-cluster centroid for each row, offset by `k`. Ties go to
/// the lowest centroid index.
pub fn assign_proxy_labels(
    features: &Matrix,
    unknown_centroids: &Matrix,
    k: usize,
) -> Result<Vec<usize>> {
    if unknown_centroids.rows() == 0 {
        return Err(Error::NoUnknownClusters);
    }
    Ok((0..features.rows())
        .map(|i| {
            let row = features.row(i);
            let mut best = (0, f64::INFINITY);
            for c in 0..unknown_centroids.rows() {
                let d = squared_distance(row, unknown_centroids.row(c));
                if d < best.1 {
                    best = (c, d);
                }
            }
            k + best.0
        })
        .collect())
}
