//! Test decisions and confidence sets by test inversion.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::critval::{cw_critical_value, CriticalValues};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{JiveProblem, NormalizedStats};
use crate::normal;
use crate::projection::ProjectionContext;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Vtfo,
    Vtf,
    Cw,
    Ms1,
    Ms2,
    Lm,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Vtfo,
        Method::Vtf,
        Method::Cw,
        Method::Ms1,
        Method::Ms2,
        Method::Lm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Vtfo => "vtfo",
            Method::Vtf => "vtf",
            Method::Cw => "cw",
            Method::Ms1 => "ms1",
            Method::Ms2 => "ms2",
            Method::Lm => "lm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Domain(format!("unknown method `{s}`")))
    }
}

/// The statistics every rejection rule reads, in f64.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleInputs {
    pub xi: f64,
    pub nu: f64,
    /// Clamped ρ.
    pub rho: f64,
    pub ar: f64,
    pub t_squared: f64,
}

impl<T: Scalar> From<&NormalizedStats<T>> for RuleInputs {
    fn from(s: &NormalizedStats<T>) -> Self {
        Self {
            xi: s.xi.as_f64(),
            nu: s.nu.as_f64(),
            rho: s.rho.as_f64(),
            ar: s.ar.as_f64(),
            t_squared: s.t_squared.as_f64(),
        }
    }
}

/// (statistic, critical value) for one method. The test rejects iff the
/// statistic strictly exceeds the critical value.
pub fn statistic_and_critical(
    method: Method,
    s: &RuleInputs,
    crit: &CriticalValues,
) -> Result<(f64, f64)> {
    let alpha = crit.alpha();
    let z1 = normal::one_sided_cutoff(alpha);
    let z2 = normal::two_sided_cutoff(alpha);
    Ok(match method {
        Method::Vtfo => (s.t_squared, crit.vtfo.critical_value(s.nu, s.rho)?),
        Method::Vtf => {
            let table = crit
                .two_sided
                .as_ref()
                .ok_or(Error::TwoSidedTableUnavailable)?;
            (s.t_squared, table.lookup(s.nu, s.rho))
        }
        Method::Cw => (
            s.t_squared,
            cw_critical_value(s.rho, s.nu - s.rho * s.xi, alpha)?,
        ),
        Method::Ms1 => (s.ar, z1),
        Method::Ms2 => (s.ar * s.ar, z2 * z2),
        Method::Lm => (s.xi * s.xi, z2 * z2),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestDecision<T> {
    pub method: Method,
    pub beta0: T,
    pub statistic: f64,
    /// +∞ means the test cannot reject.
    pub critical: f64,
    pub reject: bool,
    pub nu: f64,
    pub rho: f64,
    pub rho_clamped: bool,
}

fn decide<T: Scalar>(
    method: Method,
    stats: &NormalizedStats<T>,
    crit: &CriticalValues,
) -> Result<TestDecision<T>> {
    let inputs = RuleInputs::from(stats);
    let (statistic, critical) = statistic_and_critical(method, &inputs, crit)?;
    Ok(TestDecision {
        method,
        beta0: stats.beta0,
        statistic,
        critical,
        reject: statistic > critical,
        nu: inputs.nu,
        rho: inputs.rho,
        rho_clamped: stats.rho_clamped,
    })
}

pub fn run_test<T: Scalar>(
    method: Method,
    ctx: &ProjectionContext<T>,
    data: &Dataset<T>,
    beta0: T,
    crit: &CriticalValues,
) -> Result<TestDecision<T>> {
    let problem = JiveProblem::new(ctx, data)?;
    decide(method, &problem.normalized_stats(beta0)?, crit)
}

/// Runs a test on an already prepared problem.
pub fn run_test_on<T: Scalar>(
    method: Method,
    problem: &JiveProblem<'_, T>,
    beta0: T,
    crit: &CriticalValues,
) -> Result<TestDecision<T>> {
    decide(method, &problem.normalized_stats(beta0)?, crit)
}

/// Endpoint behaviour predicted from β₀-free quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnboundedDiagnosis {
    /// Threshold rule on ν̂: ν̂ ≤ Φ⁻¹(1−α) (one-sided) or ν̂² ≤ Φ⁻¹(1−α/2)²
    /// (two-sided). `None` when no ν̂ rule applies.
    pub nu_rule: Option<bool>,
    /// Limit of the acceptance rule as |β₀| → ∞ when it is available in
    /// closed form.
    pub exact_rule: Option<bool>,
    /// Q_XX² − Φ⁻¹(1−α/2)²·B_XXXX, the leading coefficient of the two-sided
    /// AR quartic in β₀.
    pub quartic_leading: f64,
    /// Whether the prediction is only an approximation for this method.
    pub approximate: bool,
}

impl UnboundedDiagnosis {
    pub fn predicts_unbounded(&self) -> Option<bool> {
        self.exact_rule.or(self.nu_rule)
    }
}

pub fn detect_unbounded<T: Scalar>(
    method: Method,
    stats: &NormalizedStats<T>,
    alpha: f64,
) -> UnboundedDiagnosis {
    let z1 = normal::one_sided_cutoff(alpha);
    let q2 = normal::two_sided_cutoff(alpha).powi(2);
    let nu = stats.nu.as_f64();
    let q_xx = stats.q_xx.as_f64();
    let b = stats.b_xxxx.as_f64();
    let quartic_leading = q_xx * q_xx - q2 * b;
    let one_sided = nu <= z1;
    let two_sided = nu * nu <= q2;
    let (nu_rule, exact_rule, approximate) = match method {
        // AR(β₀) → Q_XX/√B_XXXX as |β₀| → ∞.
        Method::Ms1 => (
            Some(one_sided),
            (b > 0.0).then(|| q_xx <= z1 * b.sqrt()),
            false,
        ),
        Method::Ms2 => (Some(two_sided), Some(quartic_leading <= 0.0), false),
        // ξ̂(β₀)² → ν̂² as |β₀| → ∞.
        Method::Lm => (Some(two_sided), Some(two_sided), false),
        Method::Vtfo => (Some(one_sided), None, true),
        Method::Vtf => (Some(two_sided), None, true),
        Method::Cw => (None, None, true),
    };
    UnboundedDiagnosis {
        nu_rule,
        exact_rule,
        quartic_leading,
        approximate,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) || n < 3 {
            return Err(Error::Domain(format!(
                "grid needs finite lo < hi and n >= 3, got {lo}:{hi}:{n}"
            )));
        }
        Ok(Self { lo, hi, n })
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// β̂ ± 20·√V̂ with 2001 points, or ±1000 around β̂ when V̂ vanishes.
    pub fn around_estimate(beta_hat: f64, variance: f64) -> Result<Self> {
        let half = if variance > 0.0 && variance.is_finite() {
            20.0 * variance.sqrt()
        } else {
            1000.0
        };
        Self::new(beta_hat - half, beta_hat + half, 2001)
    }
}

impl FromStr for Grid {
    type Err = Error;

    /// `lo:hi:n`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Domain(format!("grid `{s}` is not lo:hi:n"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo = parts[0].trim().parse::<f64>().map_err(|_| bad())?;
        let hi = parts[1].trim().parse::<f64>().map_err(|_| bad())?;
        let n = parts[2].trim().parse::<usize>().map_err(|_| bad())?;
        Self::new(lo, hi, n)
    }
}

/// One grid point of an inversion; `None` when the statistics are
/// undefined there (treated as not accepted).
pub type GridOutcome<T> = Option<TestDecision<T>>;

#[derive(Debug, Clone)]
pub struct ConfidenceSet<T> {
    pub method: Method,
    pub alpha: f64,
    pub grid: Grid,
    /// Closed intervals of accepted grid points, disjoint and sorted.
    pub intervals: Vec<(f64, f64)>,
    pub unbounded: bool,
    pub unbounded_reason: Option<String>,
    pub diagnosis: UnboundedDiagnosis,
    /// Whether the endpoint behaviour agrees with the diagnosis, when the
    /// diagnosis makes a prediction.
    pub diagnosis_agrees: Option<bool>,
    pub outcomes: Vec<GridOutcome<T>>,
}

impl<T: Scalar> ConfidenceSet<T> {
    pub fn accepts(&self, beta0: f64) -> bool {
        self.intervals
            .iter()
            .any(|&(a, b)| a <= beta0 && beta0 <= b)
    }

    pub fn degenerate_points(&self) -> usize {
        self.outcomes.iter().filter(|o| o.is_none()).count()
    }
}

pub fn invert_confidence_set<T: Scalar>(
    method: Method,
    ctx: &ProjectionContext<T>,
    data: &Dataset<T>,
    grid: Option<Grid>,
    crit: &CriticalValues,
) -> Result<ConfidenceSet<T>> {
    let problem = JiveProblem::new(ctx, data)?;
    let beta_hat = problem.beta_hat();
    let grid = match grid {
        Some(g) => g,
        None => {
            let v = problem
                .variance(beta_hat)
                .map(|v| v.as_f64())
                .unwrap_or(0.0);
            Grid::around_estimate(beta_hat.as_f64(), v)?
        }
    };
    let points = grid.points();
    if matches!(method, Method::Vtfo) {
        // Build the curves the grid will need in parallel up front.
        let rhos: Vec<f64> = points
            .iter()
            .filter_map(|&b| problem.normalized_stats(T::lit(b)).ok())
            .map(|s| s.rho.as_f64())
            .collect();
        crit.vtfo.prefetch(&rhos)?;
    }
    let outcomes: Vec<GridOutcome<T>> = points
        .par_iter()
        .map(|&b| match problem.normalized_stats(T::lit(b)) {
            Ok(stats) => decide(method, &stats, crit).map(Some),
            Err(Error::VarianceNonpositiveAt { .. }) | Err(Error::VarianceNonpositive) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    if outcomes.iter().all(Option::is_none) {
        return Err(Error::InversionFailed);
    }

    let accepted: Vec<bool> = outcomes
        .iter()
        .map(|o| o.as_ref().is_some_and(|d| !d.reject))
        .collect();
    let mut intervals = Vec::new();
    let mut start = None;
    for (i, &acc) in accepted.iter().enumerate() {
        match (acc, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                intervals.push((points[s], points[i - 1]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        intervals.push((points[s], points[points.len() - 1]));
    }

    let unbounded = accepted[0] && accepted[accepted.len() - 1];
    let stats = outcomes
        .iter()
        .flatten()
        .next()
        .and_then(|d| problem.normalized_stats(d.beta0).ok())
        .ok_or(Error::InversionFailed)?;
    let diagnosis = detect_unbounded(method, &stats, crit.alpha());
    let diagnosis_agrees = diagnosis.predicts_unbounded().map(|p| p == unbounded);
    let unbounded_reason = unbounded.then(|| {
        let mut r = String::from("both grid endpoints accepted");
        if diagnosis.approximate {
            r.push_str(" (no exact asymptotic rule for this method)");
        }
        r
    });
    Ok(ConfidenceSet {
        method,
        alpha: crit.alpha(),
        grid,
        intervals,
        unbounded,
        unbounded_reason,
        diagnosis,
        diagnosis_agrees,
        outcomes,
    })
}
