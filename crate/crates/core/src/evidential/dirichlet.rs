//! Translation-aware softmax and the Dirichlet evidential losses.

use super::special::{digamma_unchecked, ln_gamma_unchecked, trigamma_unchecked};
use crate::error::{Error, Result};

/// Default bound applied to logits before exponentiation.
pub const DEFAULT_LOGIT_CLAMP: f64 = 30.0;

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("gamma", format!("{gamma} must be positive")))
    }
}

fn check_logits(logits: &[f64]) -> Result<()> {
    if logits.is_empty() || logits.iter().any(|o| !o.is_finite()) {
        return Err(Error::invalid("logits", "must be non-empty and finite"));
    }
    Ok(())
}

/// `P(y) = (e^{o_y} + γ) / Σ_c (e^{o_c} + γ)`, with logits clamped to
/// `±DEFAULT_LOGIT_CLAMP`.
pub fn calibrated_softmax(logits: &[f64], gamma: f64) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    check_logits(logits)?;
    let shifted: Vec<f64> = logits
        .iter()
        .map(|o| o.clamp(-DEFAULT_LOGIT_CLAMP, DEFAULT_LOGIT_CLAMP).exp() + gamma)
        .collect();
    let total: f64 = shifted.iter().sum();
    Ok(shifted.into_iter().map(|v| v / total).collect())
}

/// Concentration `α = e^{clamp(o)} / γ + 1`.
pub fn alpha_from_logits(logits: &[f64], gamma: f64, clamp: f64) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    check_logits(logits)?;
    Ok(logits
        .iter()
        .map(|o| o.clamp(-clamp, clamp).exp() / gamma + 1.0)
        .collect())
}

fn check_alpha(alpha: &[f64]) -> Result<()> {
    if alpha.is_empty() {
        return Err(Error::invalid("concentration", "empty"));
    }
    match alpha.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        Some(&a) => Err(Error::InvalidConcentration(a)),
        None => Ok(()),
    }
}

/// Mean of `Dir(α)`: `α / Σα`.
pub fn dirichlet_expected_prob(alpha: &[f64]) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let total: f64 = alpha.iter().sum();
    Ok(alpha.iter().map(|a| a / total).collect())
}

fn check_class(alpha: &[f64], class: usize) -> Result<()> {
    if class >= alpha.len() {
        return Err(Error::invalid(
            "class",
            format!("{class} out of range for {} classes", alpha.len()),
        ));
    }
    Ok(())
}

/// `−log(α_y / Σα)`.
pub fn loss_nll(alpha: &[f64], class: usize) -> Result<f64> {
    check_alpha(alpha)?;
    check_class(alpha, class)?;
    let total: f64 = alpha.iter().sum();
    Ok(total.ln() - alpha[class].ln())
}

/// `KL(Dir(α) ‖ Dir(1))` in closed form:
/// `ln Γ(Σα) − ln Γ(C) − Σ ln Γ(α_i) + Σ (α_j − 1)(ψ(α_j) − ψ(Σα))`.
pub fn kl_to_uniform_dirichlet(alpha: &[f64]) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(kl_to_uniform_unchecked(alpha))
}

pub(crate) fn kl_to_uniform_unchecked(alpha: &[f64]) -> f64 {
    let c = alpha.len() as f64;
    let total: f64 = alpha.iter().sum();
    let psi_total = digamma_unchecked(total);
    let mut kl = ln_gamma_unchecked(total) - ln_gamma_unchecked(c);
    for &a in alpha {
        kl -= ln_gamma_unchecked(a);
        kl += (a - 1.0) * (digamma_unchecked(a) - psi_total);
    }
    // exact zero at α = 1 is lost to rounding; the divergence is never negative
    kl.max(0.0)
}

/// `∂ KL(Dir(α) ‖ Dir(1)) / ∂α_i = (α_i − 1) ψ'(α_i) − (Σα − C) ψ'(Σα)`.
pub(crate) fn kl_to_uniform_grad(alpha: &[f64], out: &mut [f64]) {
    let c = alpha.len() as f64;
    let total: f64 = alpha.iter().sum();
    let shared = (total - c) * trigamma_unchecked(total);
    for (o, &a) in out.iter_mut().zip(alpha) {
        *o = (a - 1.0) * trigamma_unchecked(a) - shared;
    }
}

/// Evidence-deflated concentration `α̃ = y + (1 − y) ⊙ α` for one-hot `y`.
pub fn deflate(alpha: &[f64], class: usize) -> Vec<f64> {
    let mut tilde = alpha.to_vec();
    tilde[class] = 1.0;
    tilde
}

/// KL regulariser on the deflated concentration.
pub fn loss_kl(alpha: &[f64], class: usize) -> Result<f64> {
    check_alpha(alpha)?;
    check_class(alpha, class)?;
    Ok(kl_to_uniform_unchecked(&deflate(alpha, class)))
}
