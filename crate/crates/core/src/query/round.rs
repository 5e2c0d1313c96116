use rand::seq::index::sample;

use super::gmm::{fit_gmm_1d, high_posterior};
use super::pool::{build_candidate_pool, select_queries, top_by_score, PrecisionController};
use crate::data::{observed_precision, PoolState, QueryLabel, RoundConfig, RoundMetrics};
use crate::error::{Error, Result};
use crate::estimation::{estimate_unknown_classes, EstimationConfig};
use crate::evidential::{primary_accuracy, train, AuxSupervision, DualHeadParams, Objective};
use crate::harness::Strategy;
use crate::matrix::Matrix;
use crate::rng;
use crate::scoring::{informativeness, purity_score, softmax};

/// Simulated annotator holding the ground-truth class of every row.
#[derive(Debug, Clone)]
pub struct Oracle {
    k: usize,
    true_class: Vec<usize>,
}

impl Oracle {
    pub fn new(k: usize, true_class: Vec<usize>) -> Self {
        Self { k, true_class }
    }

    pub fn answer(&self, row: usize) -> QueryLabel {
        let c = self.true_class[row];
        if c < self.k {
            QueryLabel::Known(c)
        } else {
            QueryLabel::Unknown
        }
    }

    pub fn true_class(&self, row: usize) -> usize {
        self.true_class[row]
    }
}

/// Everything a round needs besides the mutable pool and controller.
#[derive(Debug, Clone, Copy)]
pub struct RoundContext<'a> {
    pub features: &'a Matrix,
    pub oracle: &'a Oracle,
    /// Held-out known-class rows and their labels.
    pub test_rows: &'a [usize],
    pub test_labels: &'a [usize],
    pub config: &'a RoundConfig,
    pub strategy: Strategy,
}

#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub metrics: RoundMetrics,
    pub queried: Vec<usize>,
}

fn aux_supervision(
    features: &Matrix,
    state: &PoolState,
    ctx: &RoundContext<'_>,
) -> Result<AuxSupervision> {
    let k = state.known_classes();
    if state.labeled_unknown().is_empty() {
        return Ok(AuxSupervision::KnownOnly);
    }
    match ctx.strategy {
        Strategy::Random | Strategy::Uncertainty => Ok(AuxSupervision::KnownOnly),
        Strategy::NoClassExpansion => Ok(AuxSupervision::Collapsed),
        Strategy::E2oal | Strategy::PurityOnly | Strategy::InfoOnly => {
            let mut rows: Vec<usize> = state.labeled_known().keys().copied().collect();
            let mut labels: Vec<usize> = state.labeled_known().values().copied().collect();
            rows.extend(state.labeled_unknown().iter().copied());
            labels.extend(std::iter::repeat_n(k, state.labeled_unknown().len()));
            let cfg = EstimationConfig {
                k,
                u_max: ctx.config.u_max,
                restarts: ctx.config.kmeans_restarts,
                seed: ctx.config.seed,
                round: state.round() as u64,
            };
            let est = estimate_unknown_classes(&features.select_rows(&rows), &labels, &cfg)?;
            Ok(AuxSupervision::Proxy {
                u_hat: est.u_hat,
                labels: est.proxy_labels,
            })
        }
    }
}

fn purity_of(
    params: &DualHeadParams,
    features: &Matrix,
    rows: &[usize],
    round: usize,
) -> Result<Vec<f64>> {
    let k = params.known_classes();
    // without unknown slots the max-only variant applies
    let effective_round = if params.aux_width() > k { round } else { 1 };
    rows.iter()
        .map(|&i| {
            let (_, aux) = params.forward(features.row(i));
            purity_score(&aux, k, effective_round)
        })
        .collect()
}

fn primary_probs(params: &DualHeadParams, features: &Matrix, row: usize) -> Vec<f64> {
    softmax(&params.forward(features.row(row)).0)
}

/// One active-learning round: (from round 2) estimate unknown classes, train,
/// score, select, annotate, update the pool and the precision controller.
pub fn run_round(
    state: &mut PoolState,
    ctrl: &mut PrecisionController,
    ctx: &RoundContext<'_>,
) -> Result<RoundOutcome> {
    let cfg = ctx.config;
    let features = ctx.features;
    let round = state.round() + 1;
    let aux = aux_supervision(features, state, ctx)?;
    let objective = match ctx.strategy {
        Strategy::Random | Strategy::Uncertainty => Objective::PrimaryOnly,
        _ => Objective::Full,
    };
    let trained = train(features, state, &aux, cfg, objective)?;
    let params = &trained.params;
    let test_accuracy = primary_accuracy(params, features, ctx.test_rows, ctx.test_labels);

    let unlabeled = state.unlabeled_indices();
    let budget = cfg.budget.min(unlabeled.len());
    if budget == 0 {
        return Err(Error::invalid("round", "unlabeled pool is exhausted"));
    }
    let calibrated = ctrl.calibrated;

    let (queried, pool_size) = match ctx.strategy {
        Strategy::E2oal | Strategy::NoClassExpansion => {
            let mut all: Vec<usize> = state.labeled_known().keys().copied().collect();
            all.extend(state.labeled_unknown().iter().copied());
            all.extend(unlabeled.iter().copied());
            let scores = purity_of(params, features, &all, round)?;
            let gmm = fit_gmm_1d(&scores)?;
            let offset = all.len() - unlabeled.len();
            let candidates: Vec<(usize, f64)> = unlabeled
                .iter()
                .zip(&scores[offset..])
                .map(|(&i, &s)| (i, high_posterior(&gmm, s)))
                .collect();
            let pool = build_candidate_pool(&candidates, budget, calibrated)?;
            let info = pool
                .indices
                .iter()
                .map(|&i| informativeness(&primary_probs(params, features, i)))
                .collect::<Result<Vec<f64>>>()?;
            (select_queries(&pool, &info, budget)?, pool.len())
        }
        Strategy::PurityOnly => {
            let scores = purity_of(params, features, &unlabeled, round)?;
            let cands: Vec<(usize, f64)> = unlabeled.iter().copied().zip(scores).collect();
            (top_by_score(&cands, budget), budget)
        }
        Strategy::InfoOnly => {
            let cands = unlabeled
                .iter()
                .map(|&i| Ok((i, informativeness(&primary_probs(params, features, i))?)))
                .collect::<Result<Vec<(usize, f64)>>>()?;
            (top_by_score(&cands, budget), unlabeled.len())
        }
        Strategy::Uncertainty => {
            // lowest max-probability first
            let cands: Vec<(usize, f64)> = unlabeled
                .iter()
                .map(|&i| {
                    let p = primary_probs(params, features, i);
                    (i, -p.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
                })
                .collect();
            (top_by_score(&cands, budget), unlabeled.len())
        }
        Strategy::Random => {
            let mut g = rng::stream(cfg.seed, round as u64, rng::tag::RANDOM_QUERY);
            let picked = sample(&mut g, unlabeled.len(), budget)
                .into_iter()
                .map(|j| unlabeled[j])
                .collect();
            (picked, unlabeled.len())
        }
    };

    let answers: Vec<(usize, QueryLabel)> =
        queried.iter().map(|&i| (i, ctx.oracle.answer(i))).collect();
    let labels: Vec<QueryLabel> = answers.iter().map(|a| a.1).collect();
    let precision = observed_precision(&labels)?;
    state.apply_query_result(&answers)?;
    ctrl.update(precision)?;

    Ok(RoundOutcome {
        metrics: RoundMetrics {
            round,
            test_accuracy,
            observed_precision: precision,
            u_hat: aux.u_hat(),
            pool_size,
            calibrated_precision: calibrated,
        },
        queried,
    })
}
