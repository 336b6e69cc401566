//! Asymptotic power simulation.
//!
//! The triple (Q_ee, Q_Xe, Q_XX) is drawn directly from its limiting normal
//! law, mapped to any hypothesized β₀ through Δ = β − β₀, and every method's
//! rejection rule is applied with the variances treated as known.
//!
//! Each draw has its own ChaCha8 stream (seed, draw index) and the same draws
//! are reused for every Δ, so a run is reproducible under any degree of
//! parallelism and the simulated power curves are continuous in Δ.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::critval::{cw_tail_probability, CriticalValues};
use crate::error::{Error, Result};
use crate::estimators::RHO_CLAMP;
use crate::inference::{statistic_and_critical, Method, RuleInputs};
use crate::normal;

/// Limiting law of (Q_ee, Q_Xe, Q_XX): mean (0, 0, S√Υ) and covariance
/// [[Φ, Σ12, Σ13], [Σ12, Ψ, τ], [Σ13, τ, Υ]].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticDgp {
    pub s: f64,
    pub r: f64,
    pub phi: f64,
    pub psi: f64,
    pub upsilon: f64,
    pub tau: f64,
    pub sigma12: f64,
    pub sigma13: f64,
}

impl AsymptoticDgp {
    /// (Φ, Ψ, Υ, τ, Σ12, Σ13) = (1, (1+r²)/2, 1, r/2, r/2, r²).
    pub fn new(s: f64, r: f64) -> Result<Self> {
        if !(r.abs() < 1.0) || !s.is_finite() {
            return Err(Error::InvalidDgp(format!(
                "need |r| < 1 and finite S, got r = {r}, S = {s}"
            )));
        }
        let dgp = Self {
            s,
            r,
            phi: 1.0,
            psi: 0.5 * (1.0 + r * r),
            upsilon: 1.0,
            tau: 0.5 * r,
            sigma12: 0.5 * r,
            sigma13: r * r,
        };
        dgp.cholesky()?;
        Ok(dgp)
    }

    /// Unit variances with corr(ξ, ν) = ρ and AR independent of both; enough
    /// for the t-statistic based tests under the null.
    pub fn null_pair(s: f64, rho: f64) -> Result<Self> {
        let dgp = Self {
            s,
            r: rho,
            phi: 1.0,
            psi: 1.0,
            upsilon: 1.0,
            tau: rho,
            sigma12: 0.0,
            sigma13: 0.0,
        };
        dgp.cholesky()?;
        Ok(dgp)
    }

    pub fn covariance(&self) -> [[f64; 3]; 3] {
        [
            [self.phi, self.sigma12, self.sigma13],
            [self.sigma12, self.psi, self.tau],
            [self.sigma13, self.tau, self.upsilon],
        ]
    }

    pub fn mean(&self) -> [f64; 3] {
        [0.0, 0.0, self.s * self.upsilon.sqrt()]
    }

    /// Lower Cholesky factor; a zero pivot is allowed when its column is zero.
    pub fn cholesky(&self) -> Result<[[f64; 3]; 3]> {
        let a = self.covariance();
        let mut l = [[0.0; 3]; 3];
        let tol = 1e-12;
        for j in 0..3 {
            let d = a[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
            if d < -tol || !d.is_finite() {
                return Err(Error::InvalidDgp(
                    "covariance is not positive semidefinite".into(),
                ));
            }
            l[j][j] = d.max(0.0).sqrt();
            for i in (j + 1)..3 {
                let v = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                if l[j][j] == 0.0 {
                    if v.abs() > tol {
                        return Err(Error::InvalidDgp(
                            "covariance is not positive semidefinite".into(),
                        ));
                    }
                } else {
                    l[i][j] = v / l[j][j];
                }
            }
        }
        if self.upsilon <= 0.0 || self.psi <= 0.0 || self.phi <= 0.0 {
            return Err(Error::InvalidDgp("variances must be positive".into()));
        }
        Ok(l)
    }
}

fn draw_one(l: &[[f64; 3]; 3], mean: &[f64; 3], seed: u64, index: u64) -> [f64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let z: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
    std::array::from_fn(|i| mean[i] + (0..=i).map(|k| l[i][k] * z[k]).sum::<f64>())
}

/// `n_draws` draws of (q_ee, q_xe, q_xx).
pub fn draw_q_tr(dgp: &AsymptoticDgp, n_draws: usize, seed: u64) -> Result<Vec<[f64; 3]>> {
    if n_draws == 0 {
        return Err(Error::InvalidDgp("n_draws must be positive".into()));
    }
    let l = dgp.cholesky()?;
    let mean = dgp.mean();
    Ok((0..n_draws as u64)
        .into_par_iter()
        .map(|i| draw_one(&l, &mean, seed, i))
        .collect())
}

/// Variance objects at β₀ = β − Δ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlternativeVariances {
    pub phi: f64,
    pub psi: f64,
    pub tau: f64,
    pub sigma12: f64,
    pub sigma13: f64,
    pub upsilon: f64,
}

impl AlternativeVariances {
    /// ρ(β₀) = τ(β₀)/√(Ψ(β₀)Υ).
    pub fn rho(&self) -> f64 {
        self.tau / (self.psi * self.upsilon).sqrt()
    }
}

pub fn alternative_variances(dgp: &AsymptoticDgp, delta: f64) -> AlternativeVariances {
    let d = delta;
    let (u, t, p, s12, s13) = (dgp.upsilon, dgp.tau, dgp.psi, dgp.sigma12, dgp.sigma13);
    AlternativeVariances {
        phi: d.powi(4) * u
            + 4.0 * d.powi(3) * t
            + d * d * (4.0 * p + 2.0 * s13)
            + 4.0 * d * s12
            + dgp.phi,
        sigma12: d.powi(3) * u + 3.0 * d * d * t + d * (2.0 * p + s13) + s12,
        sigma13: d * d * u + 2.0 * d * t + s13,
        psi: d * d * u + 2.0 * d * t + p,
        tau: d * u + t,
        upsilon: u,
    }
}

/// Limiting probability of a bounded confidence set, with ν ~ N(S, 1):
/// (one-sided, two-sided).
pub fn analytic_power_bounds(s: f64, alpha: f64) -> (f64, f64) {
    let z1 = normal::one_sided_cutoff(alpha);
    let z2 = normal::two_sided_cutoff(alpha);
    (normal::sf(z1 - s), 1.0 - normal::mass(-z2 - s, z2 - s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerCurveResult {
    pub dgp: AsymptoticDgp,
    pub alpha: f64,
    pub deltas: Vec<f64>,
    pub methods: Vec<Method>,
    /// `rejections[m][d]`: rejection count of method m at Δ = deltas[d].
    pub rejections: Vec<Vec<u64>>,
    pub n_draws: usize,
    pub seed: u64,
    pub bounds: (f64, f64),
}

impl PowerCurveResult {
    pub fn rate(&self, method: Method, delta_index: usize) -> Option<f64> {
        let m = self.methods.iter().position(|&x| x == method)?;
        Some(self.rejections[m][delta_index] as f64 / self.n_draws as f64)
    }

    pub fn rates(&self, method: Method) -> Option<Vec<f64>> {
        (0..self.deltas.len())
            .map(|d| self.rate(method, d))
            .collect()
    }

    /// One-sided bound for vtfo and ms1, two-sided for the rest.
    pub fn bound_for(&self, method: Method) -> f64 {
        match method {
            Method::Vtfo | Method::Ms1 => self.bounds.0,
            _ => self.bounds.1,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "delta,method,reject_rate,n_draws,s,r,alpha")?;
        for (d, &delta) in self.deltas.iter().enumerate() {
            for (m, method) in self.methods.iter().enumerate() {
                let rate = self.rejections[m][d] as f64 / self.n_draws as f64;
                writeln!(
                    w,
                    "{delta},{method},{rate},{},{},{},{}",
                    self.n_draws, self.dgp.s, self.dgp.r, self.alpha
                )?;
            }
        }
        Ok(())
    }

    /// Line chart of rejection rate against Δ with dashed bound lines.
    pub fn write_svg<W: Write>(&self, mut w: W) -> Result<()> {
        const W: f64 = 720.0;
        const H: f64 = 440.0;
        const M: f64 = 50.0;
        let (lo, hi) = match (self.deltas.first(), self.deltas.last()) {
            (Some(&a), Some(&b)) if b > a => (a, b),
            (Some(&a), _) => (a - 1.0, a + 1.0),
            _ => (-1.0, 1.0),
        };
        let x = |d: f64| M + (d - lo) / (hi - lo) * (W - 2.0 * M);
        let y = |p: f64| H - M - p * (H - 2.0 * M);
        let colors = [
            "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
        ];
        writeln!(
            w,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
        )?;
        writeln!(w, r#"<rect width="{W}" height="{H}" fill="white"/>"#)?;
        writeln!(
            w,
            r#"<line x1="{M}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
            H - M,
            W - M,
            H - M
        )?;
        writeln!(
            w,
            r#"<line x1="{M}" y1="{M}" x2="{M}" y2="{}" stroke="black"/>"#,
            H - M
        )?;
        for p in [0.0, 0.25, 0.5, 0.75, 1.0] {
            writeln!(
                w,
                r#"<text x="{}" y="{:.1}" text-anchor="end">{p}</text>"#,
                M - 6.0,
                y(p) + 4.0
            )?;
        }
        for t in [lo, 0.5 * (lo + hi), hi] {
            writeln!(
                w,
                r#"<text x="{:.1}" y="{}" text-anchor="middle">{t}</text>"#,
                x(t),
                H - M + 18.0
            )?;
        }
        writeln!(
            w,
            r#"<text x="{}" y="{}" text-anchor="middle">Δ = β − β₀  (S = {}, r = {}, {} draws)</text>"#,
            W / 2.0,
            H - 10.0,
            self.dgp.s,
            self.dgp.r,
            self.n_draws
        )?;
        for (label, b) in [
            ("one-sided bound", self.bounds.0),
            ("two-sided bound", self.bounds.1),
        ] {
            writeln!(
                w,
                r#"<line x1="{M}" y1="{:.2}" x2="{}" y2="{:.2}" stroke="gray" stroke-dasharray="5,4"><title>{label}</title></line>"#,
                y(b),
                W - M,
                y(b)
            )?;
        }
        for (m, method) in self.methods.iter().enumerate() {
            let color = colors[m % colors.len()];
            let pts: Vec<String> = self
                .deltas
                .iter()
                .enumerate()
                .map(|(d, &delta)| {
                    let rate = self.rejections[m][d] as f64 / self.n_draws as f64;
                    format!("{:.2},{:.2}", x(delta), y(rate))
                })
                .collect();
            writeln!(
                w,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            )?;
            writeln!(
                w,
                r#"<text x="{}" y="{}" fill="{color}">{method}</text>"#,
                W - M + 6.0,
                M + 14.0 * m as f64
            )?;
        }
        writeln!(w, "</svg>")?;
        Ok(())
    }
}

/// Whether `method` rejects for one draw mapped to Δ.
fn rejects(
    method: Method,
    draw: &[f64; 3],
    delta: f64,
    alt: &AlternativeVariances,
    crit: &CriticalValues,
) -> Result<bool> {
    let [qee, qxe, qxx] = *draw;
    let q_ee = qee + 2.0 * delta * qxe + delta * delta * qxx;
    let q_xe = qxe + delta * qxx;
    let xi = q_xe / alt.psi.sqrt();
    let nu = qxx / alt.upsilon.sqrt();
    let rho_raw = alt.rho();
    let rho = rho_raw.clamp(-RHO_CLAMP, RHO_CLAMP);
    let ratio = xi / nu;
    let t_squared = xi * xi / (1.0 - 2.0 * ratio * rho_raw + ratio * ratio);
    if method == Method::Cw {
        // The conditional tail is decreasing in the threshold, so comparing
        // it with α is the same decision as comparing t² with the quantile.
        return Ok(cw_tail_probability(rho, nu - rho * xi, t_squared) < crit.alpha());
    }
    let inputs = RuleInputs {
        xi,
        nu,
        rho,
        ar: q_ee / alt.phi.sqrt(),
        t_squared,
    };
    let (s, c) = statistic_and_critical(method, &inputs, crit)?;
    Ok(s > c)
}

pub fn rejection_rates(
    dgp: &AsymptoticDgp,
    deltas: &[f64],
    methods: &[Method],
    n_draws: usize,
    crit: &CriticalValues,
    seed: u64,
) -> Result<PowerCurveResult> {
    if methods.contains(&Method::Vtf) && crit.two_sided.is_none() {
        return Err(Error::TwoSidedTableUnavailable);
    }
    let draws = draw_q_tr(dgp, n_draws, seed)?;
    let alts: Vec<AlternativeVariances> = deltas
        .iter()
        .map(|&d| alternative_variances(dgp, d))
        .collect();
    if methods.contains(&Method::Vtfo) {
        let rhos: Vec<f64> = alts.iter().map(|a| a.rho()).collect();
        crit.vtfo.prefetch(&rhos)?;
    }
    let mut rejections = Vec::with_capacity(methods.len());
    for &method in methods {
        let mut row = Vec::with_capacity(deltas.len());
        for (&delta, alt) in deltas.iter().zip(&alts) {
            let count = draws
                .par_iter()
                .map(|d| rejects(method, d, delta, alt, crit).map(u64::from))
                .try_reduce(|| 0, |a, b| Ok(a + b))?;
            row.push(count);
        }
        rejections.push(row);
    }
    Ok(PowerCurveResult {
        dgp: *dgp,
        alpha: crit.alpha(),
        deltas: deltas.to_vec(),
        methods: methods.to_vec(),
        rejections,
        n_draws,
        seed,
        bounds: analytic_power_bounds(dgp.s, crit.alpha()),
    })
}
