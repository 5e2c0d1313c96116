use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Calibrated query-precision target.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionController {
    pub target: f64,
    pub calibrated: f64,
    pub last_observed: Option<f64>,
}

impl PrecisionController {
    /// First round: the calibrated value starts at the target.
    pub fn new(target: f64) -> Self {
        Self {
            target,
            calibrated: target,
            last_observed: None,
        }
    }

    /// `p̂ ← clamp(p̂ + (p* − p̄), 0, 1)` after observing precision `p̄`.
    pub fn update(&mut self, observed: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&observed) {
            return Err(Error::invalid(
                "observed precision",
                format!("{observed} not in [0, 1]"),
            ));
        }
        self.calibrated = (self.calibrated + (self.target - observed)).clamp(0.0, 1.0);
        self.last_observed = Some(observed);
        Ok(())
    }
}

/// High-purity candidates in descending posterior order.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    pub indices: Vec<usize>,
    pub posteriors: Vec<f64>,
}

impl CandidatePool {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

fn by_posterior_desc(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Ranks unlabeled samples by high-component posterior and grows the pool
/// from the top `budget` entries while the mean posterior of its lowest
/// `budget` entries exceeds `calibrated`. The sample that makes the condition
/// fail stays in the pool.
pub fn build_candidate_pool(
    candidates: &[(usize, f64)],
    budget: usize,
    calibrated: f64,
) -> Result<CandidatePool> {
    if budget == 0 {
        return Err(Error::invalid("budget", "must be >= 1"));
    }
    if candidates.len() < budget {
        return Err(Error::BudgetExceedsPool {
            budget,
            unlabeled: candidates.len(),
        });
    }
    let mut ranked = candidates.to_vec();
    ranked.sort_by(by_posterior_desc);

    let mut size = budget;
    let mut tail_sum: f64 = ranked[..budget].iter().map(|c| c.1).sum();
    while size < ranked.len() && tail_sum / budget as f64 > calibrated {
        tail_sum += ranked[size].1 - ranked[size - budget].1;
        size += 1;
    }
    ranked.truncate(size);
    Ok(CandidatePool {
        indices: ranked.iter().map(|c| c.0).collect(),
        posteriors: ranked.iter().map(|c| c.1).collect(),
    })
}

/// Top `budget` pool entries by informativeness; ties broken by higher
/// posterior, then lower index. `info[i]` scores `pool.indices[i]`.
pub fn select_queries(pool: &CandidatePool, info: &[f64], budget: usize) -> Result<Vec<usize>> {
    if pool.len() < budget {
        return Err(Error::BudgetExceedsPool {
            budget,
            unlabeled: pool.len(),
        });
    }
    if info.len() != pool.len() {
        return Err(Error::invalid(
            "informativeness",
            format!("{} scores for {} entries", info.len(), pool.len()),
        ));
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| {
        info[b]
            .total_cmp(&info[a])
            .then(pool.posteriors[b].total_cmp(&pool.posteriors[a]))
            .then(pool.indices[a].cmp(&pool.indices[b]))
    });
    Ok(order[..budget].iter().map(|&i| pool.indices[i]).collect())
}

/// Indices of the `budget` largest scores (ties to lower index).
pub fn top_by_score(candidates: &[(usize, f64)], budget: usize) -> Vec<usize> {
    let mut ranked = candidates.to_vec();
    ranked.sort_by(by_posterior_desc);
    ranked.into_iter().take(budget).map(|c| c.0).collect()
}
