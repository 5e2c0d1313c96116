//! Log-gamma, digamma and trigamma for positive real arguments.
//!
//! All three shift the argument up to [`ASYMPTOTIC_FROM`] with the standard
//! recurrences and finish with the Stirling / Bernoulli asymptotic series,
//! whose truncation error there is far below double precision.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const ASYMPTOTIC_FROM: f64 = 15.0;

fn check(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(x))
    }
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    check(x)?;
    Ok(ln_gamma_unchecked(x))
}

/// `ψ(x) = d/dx ln Γ(x)` for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    check(x)?;
    Ok(digamma_unchecked(x))
}

/// `ψ'(x)` for `x > 0`.
pub fn trigamma(x: f64) -> Result<f64> {
    check(x)?;
    Ok(trigamma_unchecked(x))
}

pub(crate) fn ln_gamma_unchecked(mut x: f64) -> f64 {
    // ln Γ(x) = ln Γ(x + n) − ln(x (x+1) … (x+n−1))
    let mut log_shift = 0.0;
    let mut prod = 1.0;
    while x < ASYMPTOTIC_FROM {
        prod *= x;
        x += 1.0;
        if prod < 1e-250 {
            log_shift += prod.ln();
            prod = 1.0;
        }
    }
    log_shift += prod.ln();
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            + inv2
                * (-1.0 / 360.0
                    + inv2
                        * (1.0 / 1260.0
                            + inv2
                                * (-1.0 / 1680.0
                                    + inv2
                                        * (1.0 / 1188.0
                                            + inv2 * (-691.0 / 360360.0 + inv2 / 156.0))))));
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + series - log_shift
}

pub(crate) fn digamma_unchecked(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < ASYMPTOTIC_FROM {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    let series = inv2
        * (-1.0 / 12.0
            + inv2
                * (1.0 / 120.0
                    + inv2
                        * (-1.0 / 252.0
                            + inv2
                                * (1.0 / 240.0
                                    + inv2
                                        * (-1.0 / 132.0
                                            + inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    acc + x.ln() - 0.5 / x + series
}

pub(crate) fn trigamma_unchecked(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < ASYMPTOTIC_FROM {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        + 0.5 * inv2
        + inv
            * inv2
            * (1.0 / 6.0
                + inv2
                    * (-1.0 / 30.0
                        + inv2
                            * (1.0 / 42.0
                                + inv2
                                    * (-1.0 / 30.0
                                        + inv2
                                            * (5.0 / 66.0
                                                + inv2 * (-691.0 / 2730.0 + inv2 * 7.0 / 6.0))))));
    acc + series
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    const EULER_MASCHERONI: f64 = 0.577_215_664_901_532_9;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn factorial_identities() {
        assert_eq!(ln_gamma(1.0).unwrap().abs() < 1e-14, true);
        assert!(ln_gamma(2.0).unwrap().abs() < 1e-14);
        assert!(rel(ln_gamma(5.0).unwrap(), 24f64.ln()) < 1e-14);
        assert!(rel(ln_gamma(0.5).unwrap(), PI.sqrt().ln()) < 1e-13);
        let mut f = 0.0;
        for n in 2..170 {
            f += (n as f64).ln();
            assert!(rel(ln_gamma(n as f64 + 1.0).unwrap(), f) < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn digamma_known_values() {
        assert!((digamma(1.0).unwrap() + EULER_MASCHERONI).abs() < 1e-14);
        let half = -EULER_MASCHERONI - 2.0 * 2f64.ln();
        assert!(rel(digamma(0.5).unwrap(), half) < 1e-13);
        assert!((trigamma(1.0).unwrap() - PI * PI / 6.0).abs() < 1e-13);
        assert!((trigamma(0.5).unwrap() - PI * PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn recurrences() {
        let mut g = crate::rng::stream(5, 0, "special-test");
        for _ in 0..1000 {
            let x: f64 = g.random_range(1e-3..1e3);
            let d = digamma(x + 1.0).unwrap() - digamma(x).unwrap();
            assert!(rel(d, 1.0 / x) < 1e-10, "x = {x}");
            let t = trigamma(x).unwrap() - trigamma(x + 1.0).unwrap();
            assert!(rel(t, 1.0 / (x * x)) < 1e-9, "x = {x}");
            let l = ln_gamma(x + 1.0).unwrap() - ln_gamma(x).unwrap();
            assert!((l - x.ln()).abs() < 1e-12 * (1.0 + ln_gamma(x + 1.0).unwrap().abs()));
        }
    }

    #[test]
    fn agree_with_statrs() {
        let mut g = crate::rng::stream(6, 0, "special-test");
        for _ in 0..2000 {
            let x: f64 = 10f64.powf(g.random_range(-6.0..4.0));
            let ours = ln_gamma(x).unwrap();
            let theirs = statrs::function::gamma::ln_gamma(x);
            if theirs.abs() > 1e-2 {
                assert!(
                    rel(ours, theirs) < 1e-10,
                    "ln_gamma({x}): {ours} vs {theirs}"
                );
            } else {
                assert!((ours - theirs).abs() < 1e-12, "ln_gamma({x})");
            }
            let ours = digamma(x).unwrap();
            let theirs = statrs::function::gamma::digamma(x);
            if theirs.abs() > 1e-2 {
                assert!(
                    rel(ours, theirs) < 1e-10,
                    "digamma({x}): {ours} vs {theirs}"
                );
            } else {
                assert!((ours - theirs).abs() < 1e-12, "digamma({x})");
            }
        }
    }

    #[test]
    fn trigamma_is_digamma_derivative() {
        for &x in &[0.05, 0.3, 1.0, 1.7, 4.2, 14.9, 15.1, 80.0, 2500.0] {
            let h = 1e-5 * x;
            let fd = (digamma(x + h).unwrap() - digamma(x - h).unwrap()) / (2.0 * h);
            assert!(rel(trigamma(x).unwrap(), fd) < 1e-7, "x = {x}");
        }
    }

    #[test]
    fn domain_errors() {
        for x in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(ln_gamma(x), Err(Error::Domain(_))));
            assert!(matches!(digamma(x), Err(Error::Domain(_))));
            assert!(matches!(trigamma(x), Err(Error::Domain(_))));
        }
    }
}
