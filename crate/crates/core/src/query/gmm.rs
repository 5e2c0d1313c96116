use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const MAX_EM_ITERATIONS: usize = 500;
/// Stop once the mean per-sample log-likelihood improves by less than this.
pub const EM_TOLERANCE: f64 = 1e-8;
/// Component variances never drop below this fraction of the data variance.
pub const VARIANCE_FLOOR_FRACTION: f64 = 1e-6;

/// Three-component univariate Gaussian mixture, components sorted by mean
/// (index 2 is the high-purity component).
#[derive(Debug, Clone, PartialEq)]
pub struct Gmm1d {
    pub weights: [f64; 3],
    pub means: [f64; 3],
    pub variances: [f64; 3],
    /// Total log-likelihood of the data under the final parameters.
    pub log_likelihood: f64,
    /// Total log-likelihood before every M-step, then at termination.
    pub history: Vec<f64>,
    pub iterations: usize,
}

pub const HIGH: usize = 2;

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * PI * var).ln() + (x - mean) * (x - mean) / var)
}

fn log_sum_exp3(v: &[f64; 3]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Gmm1d {
    fn log_joint(&self, x: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        for j in 0..3 {
            out[j] = if self.weights[j] > 0.0 {
                self.weights[j].ln() + log_normal(x, self.means[j], self.variances[j])
            } else {
                f64::NEG_INFINITY
            };
        }
        out
    }

    /// Posterior membership of `x` in each component.
    pub fn posteriors(&self, x: f64) -> [f64; 3] {
        let lj = self.log_joint(x);
        let total = log_sum_exp3(&lj);
        let mut out = [0.0; 3];
        for j in 0..3 {
            out[j] = (lj[j] - total).exp();
        }
        out
    }

    /// Total log-likelihood of `data`.
    pub fn log_likelihood_of(&self, data: &[f64]) -> f64 {
        data.iter().map(|&x| log_sum_exp3(&self.log_joint(x))).sum()
    }
}

/// Posterior probability that `score` belongs to the high-purity component.
pub fn high_posterior(gmm: &Gmm1d, score: f64) -> f64 {
    gmm.posteriors(score)[HIGH]
}

/// EM for a three-component mixture.
///
/// Initialised with means at the 1/6, 1/2 and 5/6 quantiles, equal weights
/// and the data variance for every component.
pub fn fit_gmm_1d(scores: &[f64]) -> Result<Gmm1d> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("scores", "must be finite"));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::DegenerateScores);
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let data_var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    let floor = VARIANCE_FLOOR_FRACTION * data_var;

    let mut gmm = Gmm1d {
        weights: [1.0 / 3.0; 3],
        means: [
            quantile(&sorted, 1.0 / 6.0),
            quantile(&sorted, 0.5),
            quantile(&sorted, 5.0 / 6.0),
        ],
        variances: [data_var.max(floor); 3],
        log_likelihood: f64::NEG_INFINITY,
        history: Vec::new(),
        iterations: 0,
    };

    let mut resp = vec![[0.0f64; 3]; scores.len()];
    let mut prev = f64::NEG_INFINITY;
    loop {
        // E-step
        let mut ll = 0.0;
        for (r, &x) in resp.iter_mut().zip(scores) {
            let lj = gmm.log_joint(x);
            let total = log_sum_exp3(&lj);
            ll += total;
            for j in 0..3 {
                r[j] = (lj[j] - total).exp();
            }
        }
        gmm.history.push(ll);
        gmm.log_likelihood = ll;
        if gmm.iterations >= MAX_EM_ITERATIONS || (ll - prev) / n < EM_TOLERANCE {
            break;
        }
        prev = ll;

        // M-step
        for j in 0..3 {
            let nj: f64 = resp.iter().map(|r| r[j]).sum();
            gmm.weights[j] = nj / n;
            if nj <= 0.0 {
                continue;
            }
            let mu = resp.iter().zip(scores).map(|(r, x)| r[j] * x).sum::<f64>() / nj;
            let var = resp
                .iter()
                .zip(scores)
                .map(|(r, x)| r[j] * (x - mu) * (x - mu))
                .sum::<f64>()
                / nj;
            gmm.means[j] = mu;
            gmm.variances[j] = var.max(floor);
        }
        gmm.iterations += 1;
    }

    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| gmm.means[a].total_cmp(&gmm.means[b]));
    let (w, m, v) = (gmm.weights, gmm.means, gmm.variances);
    for (dst, &src) in order.iter().enumerate() {
        gmm.weights[dst] = w[src];
        gmm.means[dst] = m[src];
        gmm.variances[dst] = v[src];
    }
    Ok(gmm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn mixture(means: &[f64], sd: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut g = rng::stream(seed, 0, "gmm-test");
        let mut out = Vec::new();
        for &m in means {
            let d = Normal::new(m, sd).unwrap();
            out.extend((0..n).map(|_| d.sample(&mut g)));
        }
        out
    }

    #[test]
    fn recovers_separated_components() {
        let data = mixture(&[-5.0, 0.0, 5.0], 1.0, 1000, 1);
        let g = fit_gmm_1d(&data).unwrap();
        for (m, t) in g.means.iter().zip([-5.0, 0.0, 5.0]) {
            assert!((m - t).abs() < 0.3, "{:?}", g.means);
        }
        for w in g.weights {
            assert!((w - 1.0 / 3.0).abs() < 0.03, "{:?}", g.weights);
        }
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_likelihood_never_decreases() {
        let mut g = rng::stream(9, 0, "gmm-test");
        for trial in 0..20 {
            let n = g.random_range(10..400);
            let data: Vec<f64> = (0..n)
                .map(|_| g.random::<f64>().powi(3) * 10.0 - trial as f64)
                .collect();
            let fit = fit_gmm_1d(&data).unwrap();
            for w in fit.history.windows(2) {
                assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{w:?}");
            }
            assert!(fit.variances.iter().all(|v| *v > 0.0));
        }
    }

    #[test]
    fn posteriors_normalize_and_identify_components() {
        let data = mixture(&[-10.0, 0.0, 10.0], 1.0, 300, 2);
        let g = fit_gmm_1d(&data).unwrap();
        assert!(high_posterior(&g, g.means[2]) > 0.999);
        assert!(high_posterior(&g, g.means[0]) < 1e-6);
        for x in [-20.0, -3.3, 0.0, 4.4, 50.0] {
            let p = g.posteriors(x);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_scores() {
        assert!(matches!(
            fit_gmm_1d(&[1.0, 1.0, 2.0, 2.0]),
            Err(Error::DegenerateScores)
        ));
        assert!(fit_gmm_1d(&[1.0, 2.0, 3.0]).is_ok());
    }
}
