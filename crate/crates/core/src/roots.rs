//! Scalar root finding.

use crate::error::{Error, Result};

/// Brent's method on a bracketing interval `[a, b]` with `f(a)·f(b) ≤ 0`.
pub fn brent(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_iter: usize) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::Domain(format!("root not bracketed on [{a}, {b}]")));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Err(Error::Domain(format!(
        "Brent did not converge in {max_iter} iterations"
    )))
}

/// Bisection for a predicate that is false at `lo` and true at `hi`;
/// returns the upper end of the final bracket.
pub fn bisect_predicate(pred: impl Fn(f64) -> bool, lo: f64, hi: f64, tol: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Evaluates a polynomial with ascending coefficients.
pub fn horner(coef: &[f64], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Real roots of a polynomial (ascending coefficients), sorted. Roots of the
/// derivative split the line into monotone pieces, each searched by Brent.
pub fn real_roots(coef: &[f64]) -> Vec<f64> {
    let mut c = coef.to_vec();
    while c.len() > 1 && *c.last().unwrap() == 0.0 {
        c.pop();
    }
    let degree = c.len() - 1;
    match degree {
        0 => return Vec::new(),
        1 => return vec![-c[0] / c[1]],
        _ => {}
    }
    let deriv: Vec<f64> = c
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &v)| i as f64 * v)
        .collect();
    let critical = real_roots(&deriv);
    // Cauchy bound on root magnitude.
    let lead = c[degree];
    let bound = 1.0
        + c[..degree]
            .iter()
            .map(|v| (v / lead).abs())
            .fold(0.0, f64::max);
    let mut knots = vec![-bound];
    knots.extend(critical.into_iter().filter(|x| x.abs() < bound));
    knots.push(bound);
    let f = |x: f64| horner(&c, x);
    let mut roots: Vec<f64> = Vec::new();
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (f(a), f(b));
        let root = if fa == 0.0 {
            Some(a)
        } else if fa.signum() != fb.signum() {
            brent(f, a, b, 0.0, 400).ok()
        } else {
            None
        };
        if let Some(r) = root {
            if roots
                .last()
                .is_none_or(|&l| (r - l).abs() > 1e-14 * (1.0 + r.abs()))
            {
                roots.push(r);
            }
        }
    }
    if f(bound) == 0.0 {
        roots.push(bound);
    }
    roots
}
