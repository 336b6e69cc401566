//! One-sided VtF critical-value curve.
//!
//! Under the null, conditional on T = ν − ρξ, ν ~ N(T, ρ²) and the squared
//! t-statistic is the deterministic function t²(ν, T, ρ). The curve is chosen
//! so that P(t² > c(ν) | T) = α for every T.
//!
//! While the W-curve t²(·, T) crosses c(·) once, the acceptance region is
//! ν ≤ T + ρz and the curve has the closed form c(ν̄) = t²(ν̄, ν̄ − ρz). Past
//! the tangency T̃ the W-curve crosses three times (ν_L < ν_M < ν_H); ν_L and
//! ν_M are read off the curve already built and ν_H is placed so that the
//! acceptance mass of [ν*, ν_L] ∪ [ν_M, ν_H] is 1 − α, giving the next knot
//! (ν_H, t²(ν_H, T)).

use crate::critval::curve::{interpolate, CriticalValueCurve};
use crate::error::{Error, Result};
use crate::normal;
use crate::roots::brent;

/// Largest |ρ| the construction accepts.
pub const RHO_MAX: f64 = 0.9999;

#[derive(Debug, Clone, PartialEq)]
pub struct CurveBuildConfig {
    pub t_grid_step: f64,
    pub nu_grid_step: f64,
    pub nu_max: f64,
    pub root_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for CurveBuildConfig {
    fn default() -> Self {
        Self {
            t_grid_step: 0.01,
            nu_grid_step: 0.001,
            nu_max: 12.0,
            root_tolerance: 1e-10,
            max_iterations: 200,
        }
    }
}

impl CurveBuildConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.t_grid_step,
            self.nu_grid_step,
            self.nu_max,
            self.root_tolerance,
        ]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0);
        if !positive || self.max_iterations == 0 || self.root_tolerance > 1e-9 {
            return Err(Error::Domain(format!(
                "invalid curve build config {self:?}"
            )));
        }
        Ok(())
    }
}

/// t²(ν, T, ρ) = ν²(ν − T)² / (ρ²T² + (1 − ρ²)(ν − T)²).
pub fn t2_w_curve(nu: f64, t: f64, rho: f64) -> Result<f64> {
    let d = nu - t;
    let r2 = rho * rho;
    let den = r2 * t * t + (1.0 - r2) * d * d;
    if den == 0.0 {
        if nu * d == 0.0 && r2 != 0.0 {
            return Ok(0.0);
        }
        return Err(Error::DegenerateWCurvePoint);
    }
    Ok(nu * nu * d * d / den)
}

#[inline]
fn t2(nu: f64, t: f64, r2: f64) -> f64 {
    let d = nu - t;
    let den = r2 * t * t + (1.0 - r2) * d * d;
    if den == 0.0 {
        0.0
    } else {
        nu * nu * d * d / den
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::Domain(format!("alpha = {alpha} outside (0, 0.5)")));
    }
    Ok(())
}

/// Closed-form branch c(ν̄) = ν̄² / (ρ²(ν̄/(|ρ|√q) − 1)² + 1 − ρ²).
pub fn closed_form_c(nu_bar: f64, rho: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let r = rho.abs();
    if r == 0.0 || r >= 1.0 {
        return Err(Error::ClosedFormBoundary);
    }
    let z = normal::one_sided_cutoff(alpha);
    if nu_bar < r * z {
        return Err(Error::Domain(format!(
            "nu_bar = {nu_bar} below the fixed point {}",
            r * z
        )));
    }
    Ok(closed_form(nu_bar, r, z))
}

#[inline]
fn closed_form(nu_bar: f64, r: f64, z: f64) -> f64 {
    let u = nu_bar / (r * z) - 1.0;
    nu_bar * nu_bar / (r * r * u * u + 1.0 - r * r)
}

/// Fixed point (ν*, c*) = (|ρ|√q, ρ²q / (1 − ρ²)) where the curve starts.
pub fn fixed_point(rho: f64, alpha: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    let r = rho.abs();
    if r >= 1.0 {
        return Err(Error::ClosedFormBoundary);
    }
    let z = normal::one_sided_cutoff(alpha);
    Ok((r * z, r * r * z * z / (1.0 - r * r)))
}

/// Number of sign changes of t²(·, T) − c_closed(·) on a ν grid over
/// [ν*, nu_max].
pub fn crossing_count(t: f64, rho: f64, alpha: f64, nu_max: f64, nu_step: f64) -> Result<usize> {
    let (nu_star, _) = fixed_point(rho, alpha)?;
    let r = rho.abs();
    let z = normal::one_sided_cutoff(alpha);
    let n = ((nu_max - nu_star) / nu_step).ceil() as usize;
    let mut count = 0;
    let mut prev = 0.0f64;
    for i in 0..=n {
        let nu = (nu_star + i as f64 * nu_step).min(nu_max);
        let h = t2(nu, t, r * r) - closed_form(nu, r, z);
        if h != 0.0 {
            if prev != 0.0 && h.signum() != prev.signum() {
                count += 1;
            }
            prev = h;
        }
    }
    Ok(count)
}

/// max over ν ∈ [ν*, T] of t²(ν, T) − c_closed(ν). Positive once the W-curve
/// pokes above the closed-form branch before its single crossing at T + ρz.
fn excursion(t: f64, r: f64, z: f64) -> f64 {
    let nu_star = r * z;
    if t <= nu_star {
        return f64::NEG_INFINITY;
    }
    let h = |nu: f64| t2(nu, t, r * r) - closed_form(nu, r, z);
    const GRID: usize = 2000;
    let step = (t - nu_star) / GRID as f64;
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for i in 0..=GRID {
        let v = h(nu_star + i as f64 * step);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    // Golden-section polish around the best grid point.
    let mut a = nu_star + best_i.saturating_sub(1) as f64 * step;
    let mut b = (nu_star + (best_i + 1) as f64 * step).min(t);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if h(c) > h(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.max(h(0.5 * (a + b)))
}

/// Smallest T at which the W-curve meets the closed-form branch more than
/// once, and the matching ν̃ = T̃ + |ρ|z where the closed-form branch ends.
pub fn find_tangency(rho: f64, alpha: f64, cfg: &CurveBuildConfig) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    cfg.validate()?;
    let r = rho.abs();
    if r == 0.0 || r >= 1.0 {
        return Err(Error::ClosedFormBoundary);
    }
    let z = normal::one_sided_cutoff(alpha);
    let mut t = cfg.t_grid_step;
    while excursion(t, r, z) <= 0.0 {
        t += cfg.t_grid_step;
        if t + r * z > cfg.nu_max {
            return Err(Error::TangencyNotFound);
        }
    }
    let (mut lo, mut hi) = (t - cfg.t_grid_step, t);
    let mut iter = 0;
    while hi - lo > cfg.root_tolerance && iter < cfg.max_iterations {
        let mid = 0.5 * (lo + hi);
        if excursion(mid, r, z) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        iter += 1;
    }
    Ok((hi, hi + r * z))
}

/// One three-intersection step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationStep {
    pub t: f64,
    pub nu_l: f64,
    pub nu_m: f64,
    pub nu_h: f64,
    pub c_h: f64,
    /// Sign changes of t²(·, T) − c(·) found below T.
    pub crossings: usize,
}

/// Curve under construction.
#[derive(Debug, Clone)]
pub struct ContinuationState {
    rho_abs: f64,
    alpha: f64,
    nu: Vec<f64>,
    crit: Vec<f64>,
    t: f64,
    pub t_tilde: f64,
    pub nu_tilde: f64,
    pub steps: Vec<ContinuationStep>,
}

impl ContinuationState {
    /// Closed-form knots on [ν*, ν̃] spaced by the ν grid step.
    pub fn from_tangency(
        rho: f64,
        alpha: f64,
        t_tilde: f64,
        cfg: &CurveBuildConfig,
    ) -> Result<Self> {
        let r = rho.abs();
        let z = normal::one_sided_cutoff(alpha);
        let nu_star = r * z;
        let nu_tilde = t_tilde + r * z;
        let n = ((nu_tilde - nu_star) / cfg.nu_grid_step).floor() as usize;
        let mut nu: Vec<f64> = (0..=n)
            .map(|i| nu_star + i as f64 * cfg.nu_grid_step)
            .collect();
        if nu_tilde - nu[n] > 1e-9 * cfg.nu_grid_step {
            nu.push(nu_tilde);
        }
        let crit = nu.iter().map(|&v| closed_form(v, r, z)).collect();
        Ok(Self {
            rho_abs: r,
            alpha,
            nu,
            crit,
            t: t_tilde,
            t_tilde,
            nu_tilde,
            steps: Vec::new(),
        })
    }

    pub fn frontier(&self) -> f64 {
        *self.nu.last().expect("state has knots")
    }

    pub fn current_t(&self) -> f64 {
        self.t
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.nu, &self.crit)
    }

    fn into_curve(self) -> Result<CriticalValueCurve> {
        let low = self.nu[0];
        CriticalValueCurve::new(self.rho_abs, self.alpha, self.nu, self.crit, low)
    }
}

/// Advances the construction to `t_next`, appending one knot.
pub fn extend_three_crossing(
    state: &mut ContinuationState,
    t_next: f64,
    cfg: &CurveBuildConfig,
) -> Result<ContinuationStep> {
    if t_next < state.t_tilde {
        return Err(Error::ContinuationFailed {
            t: t_next,
            reason: "T below the tangency point".into(),
        });
    }
    let r = state.rho_abs;
    let r2 = r * r;
    let (nu, crit) = (&state.nu, &state.crit);
    let below = nu.partition_point(|&v| v < t_next);
    let gap = |i: usize| t2(nu[i], t_next, r2) - crit[i];

    let mut first = None;
    let mut last = None;
    let mut crossings = 0;
    let mut prev = if below > 0 { gap(0) } else { 0.0 };
    for i in 1..below {
        let cur = gap(i);
        if prev.signum() != cur.signum() || cur == 0.0 {
            crossings += 1;
            first.get_or_insert(i - 1);
            last = Some(i - 1);
        }
        prev = cur;
    }
    let f = |v: f64| t2(v, t_next, r2) - interpolate(nu, crit, v);
    let root = |i: usize| {
        brent(f, nu[i], nu[i + 1], cfg.root_tolerance, cfg.max_iterations).map_err(|e| {
            Error::ContinuationFailed {
                t: t_next,
                reason: e.to_string(),
            }
        })
    };
    let (nu_l, nu_m) = match (first, last) {
        (Some(a), Some(b)) => (root(a)?, root(b)?),
        _ => (t_next, t_next),
    };
    if nu_l > nu_m {
        return Err(Error::CrossingOrderViolated { t: t_next });
    }
    let p = 1.0 - state.alpha + normal::mass((nu_l - t_next) / r, (nu_m - t_next) / r);
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::ContinuationFailed {
            t: t_next,
            reason: format!("acceptance target {p} outside (0, 1)"),
        });
    }
    let nu_h = t_next + r * normal::quantile(p);
    let c_h = t2(nu_h, t_next, r2);
    if !(nu_h > state.frontier()) {
        return Err(Error::CrossingOrderViolated { t: t_next });
    }
    let step = ContinuationStep {
        t: t_next,
        nu_l,
        nu_m,
        nu_h,
        c_h,
        crossings,
    };
    state.nu.push(nu_h);
    state.crit.push(c_h);
    state.t = t_next;
    state.steps.push(step);
    Ok(step)
}

/// Full construction for |ρ| ∈ [0, 0.9999].
pub fn build_vtfo_curve(
    rho: f64,
    alpha: f64,
    cfg: &CurveBuildConfig,
) -> Result<CriticalValueCurve> {
    build_vtfo_curve_traced(rho, alpha, cfg).map(|(c, _)| c)
}

/// As [`build_vtfo_curve`], also returning the construction state (tangency
/// and per-step crossings).
pub fn build_vtfo_curve_traced(
    rho: f64,
    alpha: f64,
    cfg: &CurveBuildConfig,
) -> Result<(CriticalValueCurve, Option<ContinuationState>)> {
    check_alpha(alpha)?;
    cfg.validate()?;
    let r = rho.abs();
    if !(r <= RHO_MAX) {
        return Err(Error::Domain(format!("|rho| = {r} exceeds {RHO_MAX}")));
    }
    if r == 0.0 {
        // ν = T exactly, so t² = ξ²ν²/(ν² + ξ²) is monotone in ξ² and the exact
        // cutoff is q₂ν²/(ν² + q₂); it is also the |ρ| → 0 limit of the curves.
        let q2 = normal::two_sided_cutoff(alpha).powi(2);
        let n = (cfg.nu_max / cfg.nu_grid_step).ceil() as usize;
        let nu: Vec<f64> = (0..=n)
            .map(|i| (i as f64 * cfg.nu_grid_step).min(cfg.nu_max))
            .collect();
        let crit = nu.iter().map(|&v| q2 * v * v / (v * v + q2)).collect();
        let curve = CriticalValueCurve::new(0.0, alpha, nu, crit, 0.0)?;
        return Ok((curve, None));
    }
    let (t_tilde, _) = find_tangency(r, alpha, cfg)?;
    let mut state = ContinuationState::from_tangency(r, alpha, t_tilde, cfg)?;
    let max_steps = ((cfg.nu_max + 10.0) / cfg.t_grid_step).ceil() as usize * 4;
    let mut k = 1;
    while state.frontier() < cfg.nu_max {
        if k > max_steps {
            return Err(Error::ContinuationFailed {
                t: state.t,
                reason: "frontier did not reach nu_max".into(),
            });
        }
        extend_three_crossing(&mut state, t_tilde + k as f64 * cfg.t_grid_step, cfg)?;
        k += 1;
    }
    let trace = state.clone();
    Ok((state.into_curve()?, Some(trace)))
}
