//! Simulated judge designs: Xᵢ = π_{k(i)} + vᵢ, Yᵢ = βXᵢ + eᵢ, with (e, v)
//! jointly normal within observation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct JudgeDesignSpec {
    /// N_k for each judge; every entry at least 2.
    pub per_judge: Vec<usize>,
    /// First-stage mean π_k for each judge.
    pub pi: Vec<f64>,
    pub beta: f64,
    /// corr(e, v).
    pub error_corr: f64,
    pub sigma_e: f64,
    pub sigma_v: f64,
    /// Optional per-judge multiplier on both error standard deviations.
    pub judge_scale: Option<Vec<f64>>,
    pub seed: u64,
}

impl JudgeDesignSpec {
    /// `k` judges of `per` observations with a common π.
    pub fn balanced(k: usize, per: usize, pi: f64, beta: f64, error_corr: f64, seed: u64) -> Self {
        Self {
            per_judge: vec![per; k],
            pi: vec![pi; k],
            beta,
            error_corr,
            sigma_e: 1.0,
            sigma_v: 1.0,
            judge_scale: None,
            seed,
        }
    }

    pub fn n_judges(&self) -> usize {
        self.per_judge.len()
    }

    pub fn n(&self) -> usize {
        self.per_judge.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.per_judge.len();
        let bad = |m: String| Err(Error::InvalidDesign(m));
        if k == 0 {
            return bad("no judges".into());
        }
        if self.pi.len() != k {
            return bad(format!(
                "{} first-stage means for {k} judges",
                self.pi.len()
            ));
        }
        if let Some(j) = self.per_judge.iter().position(|&n| n < 2) {
            return bad(format!("judge {j} has fewer than 2 observations"));
        }
        if !(self.error_corr.abs() < 1.0) {
            return bad(format!(
                "error correlation {} outside (-1, 1)",
                self.error_corr
            ));
        }
        if !(self.sigma_e >= 0.0 && self.sigma_v >= 0.0) {
            return bad("error scales must be nonnegative".into());
        }
        if let Some(h) = &self.judge_scale {
            if h.len() != k || h.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return bad("judge scales must be positive, one per judge".into());
            }
        }
        if self.pi.iter().any(|v| !v.is_finite()) || !self.beta.is_finite() {
            return bad("non-finite design parameter".into());
        }
        Ok(())
    }

    fn scale(&self, k: usize) -> f64 {
        self.judge_scale.as_ref().map_or(1.0, |h| h[k])
    }
}

/// Draws one dataset from a single ChaCha8 stream seeded by `spec.seed`.
pub fn simulate_judge_data(spec: &JudgeDesignSpec) -> Result<Dataset<f64>> {
    simulate_replication(spec, 0)
}

/// Replication `rep` uses stream `rep` of the same seed.
pub fn simulate_replication(spec: &JudgeDesignSpec, rep: u64) -> Result<Dataset<f64>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(rep);
    let n = spec.n();
    let (mut y, mut x, mut labels) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    let c = spec.error_corr;
    let c_perp = (1.0 - c * c).sqrt();
    for (k, &nk) in spec.per_judge.iter().enumerate() {
        let h = spec.scale(k);
        for _ in 0..nk {
            let u1: f64 = StandardNormal.sample(&mut rng);
            let u2: f64 = StandardNormal.sample(&mut rng);
            let v = spec.sigma_v * h * u1;
            let e = spec.sigma_e * h * (c * u1 + c_perp * u2);
            let xi = spec.pi[k] + v;
            x.push(xi);
            y.push(spec.beta * xi + e);
            labels.push(k as i64);
        }
    }
    Dataset::judges(y, x, &labels)
}

/// Population variances of the normalized quadratic forms at a hypothesized
/// β₀, from the exact second moments of the design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationVariances {
    pub upsilon: f64,
    pub psi: f64,
    pub tau: f64,
}

impl PopulationVariances {
    pub fn rho(&self) -> f64 {
        self.tau / (self.psi * self.upsilon).sqrt()
    }
}

/// With aᵢ = Σ_{j≠i} Pᵢⱼπⱼ and per-judge error scales h_k,
///
/// ```text
/// K·Υ = 4 Σᵢ aᵢ² σᵥᵢ² + 2 Σᵢ Σ_{j≠i} Pᵢⱼ² σᵥᵢ²σᵥⱼ²
/// K·Ψ = Σᵢ aᵢ² σₑᵢ² + Σᵢ Σ_{j≠i} Pᵢⱼ² (σᵥᵢ²σₑⱼ² + σₑᵥᵢσₑᵥⱼ)
/// K·τ = 2 Σᵢ aᵢ² σₑᵥᵢ + 2 Σᵢ Σ_{j≠i} Pᵢⱼ² σᵥᵢ²σₑᵥⱼ
/// ```
///
/// at β₀ = β, and Ψ(β₀) = Ψ + 2Δτ + Δ²Υ, τ(β₀) = τ + ΔΥ with Δ = β − β₀.
pub fn population_variances(spec: &JudgeDesignSpec, beta0: f64) -> Result<PopulationVariances> {
    spec.validate()?;
    let k = spec.n_judges() as f64;
    let (mut a_v, mut a_e, mut a_ev) = (0.0, 0.0, 0.0);
    let (mut p_vv, mut p_ve, mut p_v_ev) = (0.0, 0.0, 0.0);
    let sev = spec.error_corr * spec.sigma_e * spec.sigma_v;
    for (j, &nk) in spec.per_judge.iter().enumerate() {
        let n = nk as f64;
        let h2 = spec.scale(j).powi(2);
        let a = spec.pi[j] * (n - 1.0) / n;
        // N_k observations each with aᵢ = a; N_k(N_k − 1) ordered pairs with Pᵢⱼ² = 1/N_k².
        let sum_a2 = n * a * a;
        let pairs = (n - 1.0) / n;
        a_v += sum_a2 * spec.sigma_v.powi(2) * h2;
        a_e += sum_a2 * spec.sigma_e.powi(2) * h2;
        a_ev += sum_a2 * sev * h2;
        let h4 = h2 * h2;
        p_vv += pairs * spec.sigma_v.powi(4) * h4;
        p_ve += pairs * (spec.sigma_v.powi(2) * spec.sigma_e.powi(2) + sev * sev) * h4;
        p_v_ev += pairs * spec.sigma_v.powi(2) * sev * h4;
    }
    let upsilon = (4.0 * a_v + 2.0 * p_vv) / k;
    let psi = (a_e + p_ve) / k;
    let tau = (2.0 * a_ev + 2.0 * p_v_ev) / k;
    let d = spec.beta - beta0;
    Ok(PopulationVariances {
        upsilon,
        psi: psi + 2.0 * d * tau + d * d * upsilon,
        tau: tau + d * upsilon,
    })
}
