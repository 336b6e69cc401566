//! Conditional acceptance probability of a critical-value curve under
//! ν | T ~ N(T, ρ²), located independently of the curve builder.

use std::sync::OnceLock;

use mwiv::CriticalValueCurve;
use statrs::distribution::{ContinuousCDF, Normal};

pub fn phi(x: f64) -> f64 {
    static N: OnceLock<Normal> = OnceLock::new();
    N.get_or_init(|| Normal::new(0.0, 1.0).unwrap()).cdf(x)
}

pub fn wald(nu: f64, t: f64, rho: f64) -> f64 {
    let d = nu - t;
    let den = rho * rho * t * t + (1.0 - rho * rho) * d * d;
    if den == 0.0 {
        0.0
    } else {
        nu * nu * d * d / den
    }
}

pub fn rejects(curve: &CriticalValueCurve, nu: f64, t: f64, rho: f64) -> bool {
    wald(nu, t, rho) > curve.evaluate(nu)
}

/// P(no rejection | T) by scanning a fine ν grid, bisecting each change of
/// the rejection indicator and summing normal masses of accepted pieces.
pub fn acceptance_probability(curve: &CriticalValueCurve, t: f64) -> f64 {
    let rho = curve.rho_abs();
    let (lo, hi) = (t - 9.0 * rho, t + 9.0 * rho);
    let n = 20_000;
    let h = (hi - lo) / n as f64;
    let mut edges = vec![lo];
    let mut prev = rejects(curve, lo, t, rho);
    let start_rejecting = prev;
    for i in 1..=n {
        let nu = lo + i as f64 * h;
        let cur = rejects(curve, nu, t, rho);
        if cur != prev {
            let (mut a, mut b) = (nu - h, nu);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                if rejects(curve, m, t, rho) == prev {
                    a = m;
                } else {
                    b = m;
                }
            }
            edges.push(0.5 * (a + b));
            prev = cur;
        }
    }
    edges.push(hi);
    let mass = |a: f64, b: f64| phi((b - t) / rho) - phi((a - t) / rho);
    let mut accepted = phi((lo - t) / rho) * f64::from(u8::from(!start_rejecting));
    let mut rejecting = start_rejecting;
    for w in edges.windows(2) {
        if !rejecting {
            accepted += mass(w[0], w[1]);
        }
        rejecting = !rejecting;
    }
    if !rejecting {
        accepted += 1.0 - phi((hi - t) / rho);
    }
    accepted
}
