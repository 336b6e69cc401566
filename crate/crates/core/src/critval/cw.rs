//! Conditional Wald critical values.
//!
//! Given T, the null law of the squared t-statistic is that of
//! W(ξ) = (T + ρξ)²ξ² / (T² + (1 − ρ²)ξ²) with ξ ~ N(0, 1). The event W > w is
//! p(ξ) > 0 for the quartic
//!
//! ```text
//! p(ξ) = ρ²ξ⁴ + 2Tρξ³ + (T² − w(1 − ρ²))ξ² − wT²,
//! ```
//!
//! so its probability is a sum of normal masses between the real roots.

use crate::error::{Error, Result};
use crate::normal;
use crate::roots::{brent, horner, real_roots};

/// P(W > w | T) under the null.
pub fn cw_tail_probability(rho: f64, t_stat: f64, w: f64) -> f64 {
    // W = 0 only on a null set.
    if w <= 0.0 {
        return 1.0;
    }
    let (r, t) = (rho, t_stat);
    let coef = [
        -w * t * t,
        0.0,
        t * t - w * (1.0 - r * r),
        2.0 * t * r,
        r * r,
    ];
    let mut cuts = vec![f64::NEG_INFINITY];
    cuts.extend(real_roots(&coef));
    cuts.push(f64::INFINITY);
    let mut total = 0.0;
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let probe = match (a.is_finite(), b.is_finite()) {
            (true, true) => 0.5 * (a + b),
            (false, true) => b - 1.0,
            (true, false) => a + 1.0,
            (false, false) => 0.0,
        };
        if horner(&coef, probe) > 0.0 {
            total += normal::mass(a, b);
        }
    }
    total.clamp(0.0, 1.0)
}

/// (1 − α) quantile of W given T: the conditional Wald test rejects when
/// t̂² exceeds it.
pub fn cw_critical_value(rho: f64, t_stat: f64, alpha: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) || !t_stat.is_finite() || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "conditional Wald needs |rho| < 1, finite T, alpha in (0, 1); got ({rho}, {t_stat}, {alpha})"
        )));
    }
    let f = |w: f64| cw_tail_probability(rho, t_stat, w) - alpha;
    let mut hi = normal::two_sided_cutoff(alpha).powi(2);
    let mut doublings = 0;
    while f(hi) > 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::CwQuantileFailure);
        }
    }
    brent(f, 0.0, hi, 1e-10 * hi.max(1.0), 500).map_err(|_| Error::CwQuantileFailure)
}
