use rand::seq::SliceRandom;

use super::model::{total_loss_with, DualHeadParams, Example, LossBreakdown, Objective, Workspace};
use crate::data::{PoolState, RoundConfig};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

/// How labeled unknowns supervise the auxiliary head.
#[derive(Debug, Clone, PartialEq)]
pub enum AuxSupervision {
    /// k-way auxiliary head; labeled unknowns do not take part.
    KnownOnly,
    /// (k + 1)-way head, every labeled unknown in the single extra class.
    Collapsed,
    /// (k + û)-way head with one proxy class in `[k, k + û)` per labeled
    /// unknown, in ascending index order.
    Proxy { u_hat: usize, labels: Vec<usize> },
}

impl AuxSupervision {
    pub fn u_hat(&self) -> usize {
        match self {
            AuxSupervision::KnownOnly => 0,
            AuxSupervision::Collapsed => 1,
            AuxSupervision::Proxy { u_hat, .. } => *u_hat,
        }
    }
}

/// A labeled row prepared for training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledRow {
    pub index: usize,
    pub primary: Option<usize>,
    pub auxiliary: usize,
}

/// Training rows for the current labeled pool: all labeled knowns, then the
/// labeled unknowns (when the auxiliary head has unknown slots).
pub fn labeled_rows(state: &PoolState, aux: &AuxSupervision) -> Result<Vec<LabeledRow>> {
    let k = state.known_classes();
    let mut rows: Vec<LabeledRow> = state
        .labeled_known()
        .iter()
        .map(|(&index, &c)| LabeledRow {
            index,
            primary: Some(c),
            auxiliary: c,
        })
        .collect();
    match aux {
        AuxSupervision::KnownOnly => {}
        AuxSupervision::Collapsed => {
            rows.extend(state.labeled_unknown().iter().map(|&index| LabeledRow {
                index,
                primary: None,
                auxiliary: k,
            }))
        }
        AuxSupervision::Proxy { u_hat, labels } => {
            if labels.len() != state.labeled_unknown().len() {
                return Err(Error::invalid(
                    "proxy labels",
                    format!(
                        "{} labels for {} labeled unknowns",
                        labels.len(),
                        state.labeled_unknown().len()
                    ),
                ));
            }
            if let Some(&bad) = labels.iter().find(|&&l| l < k || l >= k + u_hat) {
                return Err(Error::invalid(
                    "proxy labels",
                    format!("{bad} outside [{k}, {})", k + u_hat),
                ));
            }
            rows.extend(
                state
                    .labeled_unknown()
                    .iter()
                    .zip(labels)
                    .map(|(&index, &auxiliary)| LabeledRow {
                        index,
                        primary: None,
                        auxiliary,
                    }),
            );
        }
    }
    Ok(rows)
}

/// Trained parameters plus the full-data loss at the end of training.
#[derive(Debug, Clone)]
pub struct Trained {
    pub params: DualHeadParams,
    pub final_loss: LossBreakdown,
}

/// Mini-batch SGD with momentum and weight decay, from a fresh seeded
/// initialisation. The learning rate decays by `lr_decay` every
/// `lr_decay_every` epochs.
pub fn fit(
    features: &Matrix,
    rows: &[LabeledRow],
    known: usize,
    aux_width: usize,
    cfg: &RoundConfig,
    objective: Objective,
    round: u64,
) -> Result<Trained> {
    if rows.is_empty() {
        return Err(Error::NothingToTrain);
    }
    let mut init_rng = rng::stream(cfg.seed, round, rng::tag::PARAM_INIT);
    let mut params = DualHeadParams::init(
        features.cols(),
        cfg.hidden_dim,
        known,
        aux_width,
        cfg.gamma,
        &mut init_rng,
    );
    params.logit_clamp = cfg.logit_clamp;

    let mut shuffle_rng = rng::stream(cfg.seed, round, rng::tag::SGD_SHUFFLE);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let n_params = params.theta().len();
    let mut grad = vec![0.0; n_params];
    let mut velocity = vec![0.0; n_params];
    let mut ws = Workspace::new(&params);
    let mut batch: Vec<Example> = Vec::with_capacity(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate
            * cfg
                .lr_decay
                .powi((epoch / cfg.lr_decay_every.max(1)) as i32);
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&r| {
                let row = rows[r];
                Example {
                    features: features.row(row.index),
                    primary: row.primary,
                    auxiliary: row.auxiliary,
                }
            }));
            total_loss_with(&params, &batch, objective, &mut grad, &mut ws)?;
            let theta = params.theta_mut();
            for ((t, v), g) in theta.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = cfg.momentum * *v + g + cfg.weight_decay * *t;
                *t -= lr * *v;
            }
        }
        if !params.all_finite() {
            return Err(Error::invalid(
                "training",
                format!("non-finite parameters after epoch {epoch}"),
            ));
        }
    }

    let all: Vec<Example> = rows
        .iter()
        .map(|row| Example {
            features: features.row(row.index),
            primary: row.primary,
            auxiliary: row.auxiliary,
        })
        .collect();
    let final_loss = total_loss_with(&params, &all, objective, &mut grad, &mut ws)?;
    Ok(Trained { params, final_loss })
}

/// Retrains the dual-head model from scratch on the current labeled pool.
pub fn train(
    features: &Matrix,
    state: &PoolState,
    aux: &AuxSupervision,
    cfg: &RoundConfig,
    objective: Objective,
) -> Result<Trained> {
    let k = state.known_classes();
    let rows = labeled_rows(state, aux)?;
    fit(
        features,
        &rows,
        k,
        k + aux.u_hat(),
        cfg,
        objective,
        state.round() as u64,
    )
}

/// Fraction of rows whose primary-head argmax equals the label.
pub fn primary_accuracy(
    params: &DualHeadParams,
    features: &Matrix,
    rows: &[usize],
    labels: &[usize],
) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let correct = rows
        .iter()
        .zip(labels)
        .filter(|(&i, &y)| {
            let (p, _) = params.forward(features.row(i));
            crate::scoring::argmax(&p) == y
        })
        .count();
    correct as f64 / rows.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::QueryLabel;
    use crate::evidential::model::total_loss;
    use rand::Rng;

    fn separable(n_per: usize, classes: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut g = rng::stream(seed, 0, "train-test");
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..classes {
            for _ in 0..n_per {
                let mut x = vec![0.0; 4];
                for v in x.iter_mut() {
                    *v = g.random_range(-0.5..0.5);
                }
                x[c] += 3.0;
                rows.push(x);
                labels.push(c);
            }
        }
        (Matrix::from_rows(&rows), labels)
    }

    fn cfg() -> RoundConfig {
        RoundConfig {
            epochs: 100,
            learning_rate: 0.05,
            batch_size: 16,
            hidden_dim: 16,
            ..RoundConfig::default()
        }
    }

    #[test]
    fn separable_three_class_fits_exactly() {
        let (x, y) = separable(30, 3, 1);
        let rows: Vec<LabeledRow> = y
            .iter()
            .enumerate()
            .map(|(i, &c)| LabeledRow {
                index: i,
                primary: Some(c),
                auxiliary: c,
            })
            .collect();
        let t = fit(&x, &rows, 3, 3, &cfg(), Objective::Full, 1).unwrap();
        let idx: Vec<usize> = (0..y.len()).collect();
        assert_eq!(primary_accuracy(&t.params, &x, &idx, &y), 1.0);
        assert!(t.params.all_finite());
    }

    #[test]
    fn full_batch_descent_is_monotone() {
        let (x, y) = separable(20, 2, 2);
        let batch: Vec<Example> = y
            .iter()
            .enumerate()
            .map(|(i, &c)| Example {
                features: x.row(i),
                primary: Some(c),
                auxiliary: c,
            })
            .collect();
        let mut g = rng::stream(2, 0, rng::tag::PARAM_INIT);
        let mut p = DualHeadParams::init(4, 8, 2, 2, 1.0, &mut g);
        let mut grad = vec![0.0; p.theta().len()];
        let mut prev = f64::INFINITY;
        for _ in 0..50 {
            let loss = total_loss(&p, &batch, Objective::Full, &mut grad)
                .unwrap()
                .total();
            assert!(loss < prev, "{loss} >= {prev}");
            prev = loss;
            for (t, d) in p.theta_mut().iter_mut().zip(&grad) {
                *t -= 0.05 * d;
            }
        }
    }

    #[test]
    fn aux_width_follows_estimate_and_is_deterministic() {
        let (x, y) = separable(10, 3, 3);
        let pool: Vec<usize> = (0..y.len()).collect();
        let initial: Vec<(usize, usize)> = (0..y.len()).step_by(2).map(|i| (i, y[i])).collect();
        let mut state = PoolState::new(3, &pool, &initial).unwrap();
        let c = cfg();
        let t1 = train(&x, &state, &AuxSupervision::KnownOnly, &c, Objective::Full).unwrap();
        assert_eq!(t1.params.aux_width(), 3);

        state
            .apply_query_result(&[(1, QueryLabel::Unknown), (3, QueryLabel::Unknown)])
            .unwrap();
        let aux = AuxSupervision::Proxy {
            u_hat: 7,
            labels: vec![3, 9],
        };
        let a = train(&x, &state, &aux, &c, Objective::Full).unwrap();
        let b = train(&x, &state, &aux, &c, Objective::Full).unwrap();
        assert_eq!(a.params.aux_width(), 3 + 7);
        assert_eq!(
            a.final_loss.total().to_bits(),
            b.final_loss.total().to_bits()
        );
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn empty_pool_is_error() {
        let x = Matrix::from_rows(&[[0.0, 1.0]]);
        let state = PoolState::new(2, &[0], &[]).unwrap();
        assert!(matches!(
            train(
                &x,
                &state,
                &AuxSupervision::KnownOnly,
                &cfg(),
                Objective::Full
            ),
            Err(Error::NothingToTrain)
        ));
    }

    #[test]
    fn proxy_labels_are_validated() {
        let state = PoolState::new(2, &[0, 1], &[]).unwrap();
        let aux = AuxSupervision::Proxy {
            u_hat: 2,
            labels: vec![2],
        };
        assert!(labeled_rows(&state, &aux).is_err());
    }
}
