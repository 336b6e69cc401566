//! JIVE point estimate, jackknife variance, feasible variance estimators and
//! the normalized statistics (AR, ξ, ν, ρ) at a hypothesized β₀.
//!
//! All heteroskedasticity-robust variance estimators share one bilinear form
//!
//! ```text
//! ψ(a, b) = (1/K) [ Σᵢ gᵢ² aᵢ (Mb)ᵢ / Mᵢᵢ + Σᵢ Σ_{j≠i} P̃²ᵢⱼ (MX)ᵢ aᵢ (MX)ⱼ bⱼ ],
//! gᵢ = Σ_{j≠i} Pᵢⱼ Xⱼ,
//! ```
//!
//! with Υ̂ = ψ(X, X), Ψ̂(β₀) = ψ(e, e), τ̂(β₀) = (ψ(X, e) + ψ(e, X)) / 2 and
//! V̂ = ψ(ê, ê) / Q_XX². Because V̂ is the same form evaluated at
//! ê = e(β₀) − (β̂ − β₀)X, the squared t-statistic equals the (ξ̂, ν̂, ρ̂)
//! closed form exactly, not only asymptotically.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::projection::ProjectionContext;
use crate::scalar::{rel_close, Scalar};

/// Bound applied to ρ̂ before any critical-value lookup.
pub const RHO_CLAMP: f64 = 0.9999;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceEstimates<T> {
    pub upsilon_hat: T,
    pub tau_hat: T,
    pub psi_hat: T,
    /// Plug-in value B(e, e, e, e).
    pub phi_hat: T,
    /// Φ̂ rebuilt from the β₀-polynomial of B-moments of (y, x).
    pub phi_hat_expansion: T,
    pub at_beta0: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedStats<T> {
    pub beta0: T,
    pub xi: T,
    pub nu: T,
    /// ρ̂ clamped to ±0.9999.
    pub rho: T,
    pub rho_raw: T,
    pub rho_clamped: bool,
    pub ar: T,
    /// (β̂ − β₀)² / V̂.
    pub t_squared: T,
    pub q_xx: T,
    pub q_xe: T,
    pub q_ee: T,
    pub b_xxxx: T,
}

impl<T: Scalar> NormalizedStats<T> {
    /// T̂ = ν̂ − ρ̂ξ̂, the statistic the conditional Wald test conditions on.
    pub fn conditioning_stat(&self) -> T {
        self.nu - self.rho * self.xi
    }
}

/// Squared t-statistic written through the normalized statistics:
/// ξ² / (1 − 2(ξ/ν)ρ + ξ²/ν²).
pub fn t_squared_closed_form<T: Scalar>(xi: T, nu: T, rho: T) -> T {
    let r = xi / nu;
    xi * xi / (T::one() - T::lit(2.0) * r * rho + r * r)
}

/// Precomputed β₀-free pieces of one (context, dataset) pair.
#[derive(Debug, Clone)]
pub struct JiveProblem<'a, T> {
    ctx: &'a ProjectionContext<T>,
    data: &'a Dataset<T>,
    inv_k: T,
    /// gᵢ² / Mᵢᵢ.
    lev_weight: Vec<T>,
    mx: Vec<T>,
    q_xx: T,
    q_xy: T,
    upsilon_hat: T,
    phi_poly: [T; 5],
}

impl<'a, T: Scalar> JiveProblem<'a, T> {
    pub fn new(ctx: &'a ProjectionContext<T>, data: &'a Dataset<T>) -> Result<Self> {
        if ctx.n() != data.n() {
            return Err(Error::Dimension(format!(
                "context built for N = {}, dataset has N = {}",
                ctx.n(),
                data.n()
            )));
        }
        let (x, y) = (data.x(), data.y());
        let g = ctx.leave_out(x);
        let lev_weight = g
            .iter()
            .enumerate()
            .map(|(i, &gi)| gi * gi / ctx.m_diag(i))
            .collect();
        let mx = ctx.annihilate(x);
        let q_xx = ctx.quadratic_form(x, x)?;
        let q_xy = ctx.quadratic_form(x, y)?;
        let scale = x.iter().map(|&v| v * v).sum::<T>() / T::lit(ctx.k() as f64).sqrt();
        if !(q_xx.abs() >= T::lit(1e-12) * scale) || scale == T::zero() {
            return Err(Error::DegenerateFirstStage);
        }
        let mut problem = Self {
            ctx,
            data,
            inv_k: T::one() / T::lit(ctx.k() as f64),
            lev_weight,
            mx,
            q_xx,
            q_xy,
            upsilon_hat: T::zero(),
            phi_poly: [T::zero(); 5],
        };
        problem.upsilon_hat = problem.psi_form(x, x, &problem.mx);
        problem.phi_poly = problem.phi_expansion_coefficients()?;
        Ok(problem)
    }

    pub fn context(&self) -> &ProjectionContext<T> {
        self.ctx
    }

    pub fn data(&self) -> &Dataset<T> {
        self.data
    }

    pub fn q_xx(&self) -> T {
        self.q_xx
    }

    pub fn upsilon_hat(&self) -> T {
        self.upsilon_hat
    }

    /// B_XXXX, the leading coefficient of the Φ̂(β₀) polynomial.
    pub fn b_xxxx(&self) -> T {
        self.phi_poly[4]
    }

    /// Coefficients (ascending powers of β₀) of Φ̂(β₀).
    pub fn phi_polynomial(&self) -> [T; 5] {
        self.phi_poly
    }

    /// ψ(a, b) given `mb = M b`.
    fn psi_form(&self, a: &[T], b: &[T], mb: &[T]) -> T {
        let first: T = self
            .lev_weight
            .iter()
            .zip(a)
            .zip(mb)
            .map(|((&w, &ai), &mbi)| w * ai * mbi)
            .sum();
        let u: Vec<T> = self.mx.iter().zip(a).map(|(&m, &v)| m * v).collect();
        let v: Vec<T> = self.mx.iter().zip(b).map(|(&m, &v)| m * v).collect();
        self.inv_k * (first + self.ctx.adjusted_pair_sum(&u, &v))
    }

    /// Φ̂(β₀) = B(e, e, e, e) with e = y − β₀x expanded by multilinearity:
    /// each of the 16 (a, b, c, d) ∈ {y, x}⁴ kernels contributes (−β₀)^{#x}.
    fn phi_expansion_coefficients(&self) -> Result<[T; 5]> {
        let (x, y) = (self.data.x(), self.data.y());
        let mut coef = [T::zero(); 5];
        for mask in 0u8..16 {
            let pick = |bit: u8| if mask & (1 << bit) != 0 { x } else { y };
            let b = self.ctx.cross_moment(pick(0), pick(1), pick(2), pick(3))?;
            let power = mask.count_ones() as usize;
            let sign = if power % 2 == 0 { T::one() } else { -T::one() };
            coef[power] = coef[power] + sign * b;
        }
        Ok(coef)
    }

    pub fn phi_hat_expansion(&self, beta0: T) -> T {
        self.phi_poly
            .iter()
            .rev()
            .fold(T::zero(), |acc, &c| acc * beta0 + c)
    }

    pub fn residual(&self, beta0: T) -> Vec<T> {
        self.data
            .y()
            .iter()
            .zip(self.data.x())
            .map(|(&y, &x)| y - beta0 * x)
            .collect()
    }

    /// β̂ = Q_xy / Q_xx.
    pub fn beta_hat(&self) -> T {
        self.q_xy / self.q_xx
    }

    /// V̂ = ψ(ê, ê) / Q_XX² with ê = y − xβ̂.
    pub fn variance(&self, beta_hat: T) -> Result<T> {
        if !beta_hat.is_finite() {
            return Err(Error::Domain("β̂ must be finite".into()));
        }
        let e = self.residual(beta_hat);
        let me = self.ctx.annihilate(&e);
        let v = self.psi_form(&e, &e, &me) / (self.q_xx * self.q_xx);
        let exact_fit = e.iter().all(|&r| r == T::zero());
        if v < T::zero() || (v == T::zero() && !exact_fit) || !v.is_finite() {
            return Err(Error::VarianceNonpositive);
        }
        Ok(v)
    }

    pub fn variance_estimates_at(&self, beta0: T) -> Result<VarianceEstimates<T>> {
        let x = self.data.x();
        let e = self.residual(beta0);
        let me = self.ctx.annihilate(&e);
        let psi_hat = self.psi_form(&e, &e, &me);
        let tau_hat = T::lit(0.5) * (self.psi_form(x, &e, &me) + self.psi_form(&e, x, &self.mx));
        let em: Vec<T> = e.iter().zip(&me).map(|(&a, &b)| a * b).collect();
        let phi_hat = T::lit(2.0) * self.inv_k * self.ctx.adjusted_pair_sum(&em, &em);
        if !(psi_hat > T::zero()) || !(phi_hat > T::zero()) {
            return Err(Error::VarianceNonpositiveAt {
                beta0: beta0.as_f64(),
            });
        }
        Ok(VarianceEstimates {
            upsilon_hat: self.upsilon_hat,
            tau_hat,
            psi_hat,
            phi_hat,
            phi_hat_expansion: self.phi_hat_expansion(beta0),
            at_beta0: beta0,
        })
    }

    pub fn normalized_stats(&self, beta0: T) -> Result<NormalizedStats<T>> {
        if !(self.upsilon_hat > T::zero()) {
            return Err(Error::VarianceNonpositive);
        }
        let v = self.variance_estimates_at(beta0)?;
        let e = self.residual(beta0);
        let q_xe = self.ctx.quadratic_form(self.data.x(), &e)?;
        let q_ee = self.ctx.quadratic_form(&e, &e)?;
        let xi = q_xe / v.psi_hat.sqrt();
        let nu = self.q_xx / self.upsilon_hat.sqrt();
        let rho_raw = v.tau_hat / (v.psi_hat * self.upsilon_hat).sqrt();
        let bound = T::lit(RHO_CLAMP);
        let rho = rho_raw.max(-bound).min(bound);
        let d = self.beta_hat() - beta0;
        let t_squared = d * d / self.variance(self.beta_hat())?;
        Ok(NormalizedStats {
            beta0,
            xi,
            nu,
            rho,
            rho_raw,
            rho_clamped: rho != rho_raw,
            ar: q_ee / v.phi_hat.sqrt(),
            t_squared,
            q_xx: self.q_xx,
            q_xe,
            q_ee,
            b_xxxx: self.b_xxxx(),
        })
    }

    /// (β̂ − β₀)² / V̂, verified against the closed form in (ξ̂, ν̂, ρ̂).
    pub fn t_squared(&self, beta0: T) -> Result<T> {
        let s = self.normalized_stats(beta0)?;
        let closed = t_squared_closed_form(s.xi, s.nu, s.rho_raw);
        let floor = T::epsilon() * T::lit(1e3) * (T::one() + s.xi * s.xi);
        if !rel_close(s.t_squared, closed, T::identity_tolerance(), floor) {
            return Err(Error::IdentityViolation {
                direct: s.t_squared.as_f64(),
                closed_form: closed.as_f64(),
            });
        }
        Ok(s.t_squared)
    }
}

pub fn jive_point_estimate<T: Scalar>(ctx: &ProjectionContext<T>, data: &Dataset<T>) -> Result<T> {
    Ok(JiveProblem::new(ctx, data)?.beta_hat())
}

pub fn jive_variance<T: Scalar>(
    ctx: &ProjectionContext<T>,
    data: &Dataset<T>,
    beta_hat: T,
) -> Result<T> {
    JiveProblem::new(ctx, data)?.variance(beta_hat)
}

pub fn variance_estimates_at<T: Scalar>(
    ctx: &ProjectionContext<T>,
    data: &Dataset<T>,
    beta0: T,
) -> Result<VarianceEstimates<T>> {
    JiveProblem::new(ctx, data)?.variance_estimates_at(beta0)
}

pub fn normalized_stats<T: Scalar>(
    ctx: &ProjectionContext<T>,
    data: &Dataset<T>,
    beta0: T,
) -> Result<NormalizedStats<T>> {
    JiveProblem::new(ctx, data)?.normalized_stats(beta0)
}

pub fn jive_t_squared<T: Scalar>(
    ctx: &ProjectionContext<T>,
    data: &Dataset<T>,
    beta0: T,
) -> Result<T> {
    JiveProblem::new(ctx, data)?.t_squared(beta0)
}
