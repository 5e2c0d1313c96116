//! Purity and informativeness scores.

use crate::error::{Error, Result};

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|o| (o - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Logit margin between the best known class and the best unknown class of
/// the auxiliary head. In round 1 the head has no unknown slots and the score
/// is the best known logit alone.
pub fn purity_score(aux_logits: &[f64], k: usize, round: usize) -> Result<f64> {
    if aux_logits.len() < k || k == 0 || aux_logits.iter().any(|o| !o.is_finite()) {
        return Err(Error::invalid(
            "logits",
            format!("need {k} finite known-class logits"),
        ));
    }
    let known_max = aux_logits[..k]
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if round <= 1 {
        return Ok(known_max);
    }
    if aux_logits.len() == k {
        return Err(Error::NoUnknownClasses);
    }
    let unknown_max = aux_logits[k..]
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(known_max - unknown_max)
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution("empty".into()));
    }
    if p.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidDistribution(
            "negative or non-finite entry".into(),
        ));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidDistribution(format!("sums to {total}")));
    }
    Ok(())
}

/// Sum of `a log2(a / m)` with `0 log 0 = 0`.
fn kl_to_mixture(a: &[f64], m: &[f64]) -> f64 {
    a.iter()
        .zip(m)
        .filter(|(&x, _)| x > 0.0)
        .map(|(&x, &y)| x * (x / y).log2())
        .sum()
}

/// Jensen–Shannon divergence in bits, in `[0, 1]`.
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidDistribution(format!(
            "length {} vs {}",
            p.len(),
            q.len()
        )));
    }
    check_distribution(p)?;
    check_distribution(q)?;
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let js = 0.5 * kl_to_mixture(p, &m) + 0.5 * kl_to_mixture(q, &m);
    Ok(js.clamp(0.0, 1.0))
}

/// `JS(p ‖ uniform) · JS(p ‖ one-hot(argmax p))`: zero at both the uniform
/// and the one-hot extremes, largest for moderately uncertain predictions.
pub fn informativeness(p: &[f64]) -> Result<f64> {
    check_distribution(p)?;
    let n = p.len();
    let uniform = vec![1.0 / n as f64; n];
    let mut peak = vec![0.0; n];
    peak[argmax(p)] = 1.0;
    Ok(js_divergence(p, &uniform)? * js_divergence(p, &peak)?)
}
