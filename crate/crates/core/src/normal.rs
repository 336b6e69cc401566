//! Standard normal distribution helpers: libm's erfc for probabilities,
//! statrs for the quantile.

use std::sync::OnceLock;

use statrs::distribution::{ContinuousCDF, Normal};

fn standard() -> &'static Normal {
    static N: OnceLock<Normal> = OnceLock::new();
    N.get_or_init(|| Normal::standard())
}

/// Φ(x).
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// 1 − Φ(x), accurate in the upper tail.
pub fn sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Φ⁻¹(p) for p ∈ (0, 1).
pub fn quantile(p: f64) -> f64 {
    standard().inverse_cdf(p)
}

/// Φ(b) − Φ(a), computed on whichever tail keeps precision.
pub fn mass(a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    if a > 0.0 {
        sf(a) - sf(b)
    } else {
        cdf(b) - cdf(a)
    }
}

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// One-sided cutoff Φ⁻¹(1 − α).
pub fn one_sided_cutoff(alpha: f64) -> f64 {
    quantile(1.0 - alpha)
}

/// Two-sided cutoff Φ⁻¹(1 − α/2).
pub fn two_sided_cutoff(alpha: f64) -> f64 {
    quantile(1.0 - alpha / 2.0)
}
