//! Projection machinery: P = Z(Z'Z)⁻¹Z', the annihilator M = I − P, the
//! adjusted weights P̃²ᵢⱼ = Pᵢⱼ² / (MᵢᵢMⱼⱼ + Mᵢⱼ²), and the leave-out forms
//! built on them.
//!
//! Two representations are supported. The dense path materializes P from an
//! orthonormal basis of the instrument columns. The judge path never stores
//! an N×N matrix: with Pᵢⱼ = 1{k(i) = k(j)} / N_k every form reduces to
//! per-judge sums.

use crate::data::{Dataset, DenseMatrix, Instruments};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Dense,
    JudgeBlock,
}

#[derive(Debug, Clone)]
enum Kind<T> {
    Dense {
        /// Row-major N×N projection.
        p: Vec<T>,
    },
    Judge {
        labels: Vec<usize>,
        sizes: Vec<usize>,
    },
}

/// Immutable projection context shared by all statistics of one dataset.
#[derive(Debug, Clone)]
pub struct ProjectionContext<T> {
    n: usize,
    k: usize,
    kind: Kind<T>,
}

/// Builds the projection context for a dataset.
pub fn build_projection<T: Scalar>(data: &Dataset<T>) -> Result<ProjectionContext<T>> {
    match data.instruments() {
        Instruments::Dense(z) => dense_context(z),
        Instruments::Judges(labels) => judge_context(labels, data.k()),
    }
}

fn judge_context<T: Scalar>(labels: &[usize], k: usize) -> Result<ProjectionContext<T>> {
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    if let Some((judge, &count)) = sizes.iter().enumerate().find(|(_, &c)| c < 2) {
        return Err(Error::InsufficientClusterSize { judge, count });
    }
    Ok(ProjectionContext {
        n: labels.len(),
        k,
        kind: Kind::Judge {
            labels: labels.to_vec(),
            sizes,
        },
    })
}

fn dense_context<T: Scalar>(z: &DenseMatrix<T>) -> Result<ProjectionContext<T>> {
    let (n, k) = (z.rows(), z.cols());
    let q = orthonormal_columns(z)?;
    let mut p = vec![T::zero(); n * n];
    for i in 0..n {
        let qi = &q[i * k..(i + 1) * k];
        for j in i..n {
            let qj = &q[j * k..(j + 1) * k];
            let v: T = qi.iter().zip(qj).map(|(&a, &b)| a * b).sum();
            p[i * n + j] = v;
            p[j * n + i] = v;
        }
    }
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
    for i in 0..n {
        if T::one() - p[i * n + i] <= tol {
            return Err(Error::UnitLeverage { index: i });
        }
    }
    Ok(ProjectionContext {
        n,
        k,
        kind: Kind::Dense { p },
    })
}

/// Orthonormal basis (row-major N×K) of the column space of `z`, by modified
/// Gram–Schmidt with one reorthogonalization pass.
fn orthonormal_columns<T: Scalar>(z: &DenseMatrix<T>) -> Result<Vec<T>> {
    let (n, k) = (z.rows(), z.cols());
    let mut cols: Vec<Vec<T>> = (0..k).map(|j| z.column(j)).collect();
    let norm = |v: &[T]| v.iter().map(|&a| a * a).sum::<T>().sqrt();
    let tol = T::lit(1e-10).max(T::epsilon() * T::lit(1e3));
    for j in 0..k {
        let original = norm(&cols[j]);
        if original == T::zero() {
            return Err(Error::RankDeficientInstruments);
        }
        for _pass in 0..2 {
            for i in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let qi = &done[i];
                let v = &mut rest[0];
                let proj: T = qi.iter().zip(v.iter()).map(|(&a, &b)| a * b).sum();
                for (vv, &qq) in v.iter_mut().zip(qi) {
                    *vv = *vv - proj * qq;
                }
            }
        }
        let remaining = norm(&cols[j]);
        if remaining <= tol * original {
            return Err(Error::RankDeficientInstruments);
        }
        for v in cols[j].iter_mut() {
            *v = *v / remaining;
        }
    }
    let mut q = vec![T::zero(); n * k];
    for (j, c) in cols.iter().enumerate() {
        for i in 0..n {
            q[i * k + j] = c[i];
        }
    }
    Ok(q)
}

fn check_len<T>(n: usize, v: &[T], name: &str) -> Result<()> {
    if v.len() != n {
        return Err(Error::Dimension(format!(
            "{name} has length {}, expected {n}",
            v.len()
        )));
    }
    Ok(())
}

impl<T: Scalar> ProjectionContext<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn representation(&self) -> Representation {
        match self.kind {
            Kind::Dense { .. } => Representation::Dense,
            Kind::Judge { .. } => Representation::JudgeBlock,
        }
    }

    pub fn p_entry(&self, i: usize, j: usize) -> T {
        match &self.kind {
            Kind::Dense { p } => p[i * self.n + j],
            Kind::Judge { labels, sizes } => {
                if labels[i] == labels[j] {
                    T::one() / T::lit(sizes[labels[i]] as f64)
                } else {
                    T::zero()
                }
            }
        }
    }

    pub fn m_diag(&self, i: usize) -> T {
        T::one() - self.p_entry(i, i)
    }

    pub fn m_entry(&self, i: usize, j: usize) -> T {
        let delta = if i == j { T::one() } else { T::zero() };
        delta - self.p_entry(i, j)
    }

    pub fn p_tilde_sq(&self, i: usize, j: usize) -> T {
        let p = self.p_entry(i, j);
        let m = self.m_entry(i, j);
        p * p / (self.m_diag(i) * self.m_diag(j) + m * m)
    }

    /// `(Σ_{j≠i} Pᵢⱼ bⱼ)ᵢ`.
    pub fn leave_out(&self, b: &[T]) -> Vec<T> {
        match &self.kind {
            Kind::Dense { p } => (0..self.n)
                .map(|i| {
                    let row = &p[i * self.n..(i + 1) * self.n];
                    let full: T = row.iter().zip(b).map(|(&a, &c)| a * c).sum();
                    full - row[i] * b[i]
                })
                .collect(),
            Kind::Judge { labels, sizes } => {
                let totals = judge_sums(labels, sizes.len(), b);
                labels
                    .iter()
                    .zip(b)
                    .map(|(&l, &bi)| (totals[l] - bi) / T::lit(sizes[l] as f64))
                    .collect()
            }
        }
    }

    /// `M b`, the residual of `b` after projecting on the instruments.
    pub fn annihilate(&self, b: &[T]) -> Vec<T> {
        match &self.kind {
            Kind::Dense { p } => (0..self.n)
                .map(|i| {
                    let row = &p[i * self.n..(i + 1) * self.n];
                    let pb: T = row.iter().zip(b).map(|(&a, &c)| a * c).sum();
                    b[i] - pb
                })
                .collect(),
            Kind::Judge { labels, sizes } => {
                let totals = judge_sums(labels, sizes.len(), b);
                labels
                    .iter()
                    .zip(b)
                    .map(|(&l, &bi)| bi - totals[l] / T::lit(sizes[l] as f64))
                    .collect()
            }
        }
    }

    /// `Σᵢ Σ_{j≠i} wᵢⱼ uᵢ vⱼ` for a symmetric weight, accumulated over i < j so
    /// that swapping `u` and `v` gives a bitwise identical result.
    fn symmetric_pair_sum(&self, weight: impl Fn(usize, usize) -> T, u: &[T], v: &[T]) -> T {
        let mut total = T::zero();
        for i in 0..self.n {
            let mut row = T::zero();
            for j in (i + 1)..self.n {
                row = row + weight(i, j) * (u[i] * v[j] + u[j] * v[i]);
            }
            total = total + row;
        }
        total
    }

    /// `Σᵢ Σ_{j≠i} Pᵢⱼ aᵢ bⱼ` without the 1/√K factor.
    pub(crate) fn leave_out_sum(&self, a: &[T], b: &[T]) -> T {
        match &self.kind {
            Kind::Dense { p } => self.symmetric_pair_sum(|i, j| p[i * self.n + j], a, b),
            Kind::Judge { labels, sizes } => {
                block_pair_sum(labels, sizes, a, b, |n_k| T::one() / T::lit(n_k as f64))
            }
        }
    }

    /// `Σᵢ Σ_{j≠i} P̃²ᵢⱼ uᵢ vⱼ`.
    pub fn adjusted_pair_sum(&self, u: &[T], v: &[T]) -> T {
        match &self.kind {
            Kind::Dense { p } => {
                let n = self.n;
                let m_diag: Vec<T> = (0..n).map(|i| T::one() - p[i * n + i]).collect();
                self.symmetric_pair_sum(
                    |i, j| {
                        let pij = p[i * n + j];
                        let sq = pij * pij;
                        sq / (m_diag[i] * m_diag[j] + sq)
                    },
                    u,
                    v,
                )
            }
            Kind::Judge { labels, sizes } => block_pair_sum(labels, sizes, u, v, |n_k| {
                let m1 = T::lit((n_k - 1) as f64);
                T::one() / (m1 * m1 + T::one())
            }),
        }
    }

    /// Q_AB = (1/√K) Σᵢ Σ_{j≠i} Pᵢⱼ aᵢ bⱼ.
    pub fn quadratic_form(&self, a: &[T], b: &[T]) -> Result<T> {
        check_len(self.n, a, "a")?;
        check_len(self.n, b, "b")?;
        Ok(self.leave_out_sum(a, b) / T::lit(self.k as f64).sqrt())
    }

    /// B_ABCD = (2/K) Σᵢ Σ_{j≠i} P̃²ᵢⱼ [aᵢ (Mb)ᵢ][cⱼ (Md)ⱼ].
    pub fn cross_moment(&self, a: &[T], b: &[T], c: &[T], d: &[T]) -> Result<T> {
        for (v, name) in [(a, "a"), (b, "b"), (c, "c"), (d, "d")] {
            check_len(self.n, v, name)?;
        }
        let mb = self.annihilate(b);
        let md = self.annihilate(d);
        let left: Vec<T> = a.iter().zip(&mb).map(|(&u, &v)| u * v).collect();
        let right: Vec<T> = c.iter().zip(&md).map(|(&u, &v)| u * v).collect();
        Ok(T::lit(2.0) / T::lit(self.k as f64) * self.adjusted_pair_sum(&left, &right))
    }
}

fn judge_sums<T: Scalar>(labels: &[usize], k: usize, b: &[T]) -> Vec<T> {
    let mut totals = vec![T::zero(); k];
    for (&l, &v) in labels.iter().zip(b) {
        totals[l] = totals[l] + v;
    }
    totals
}

/// `Σ_k w(N_k) [(Σ_{i∈k} uᵢ)(Σ_{i∈k} vᵢ) − Σ_{i∈k} uᵢvᵢ]`, i.e. the same-judge
/// off-diagonal pair sum with a weight constant within each judge.
fn block_pair_sum<T: Scalar>(
    labels: &[usize],
    sizes: &[usize],
    u: &[T],
    v: &[T],
    weight: impl Fn(usize) -> T,
) -> T {
    let k = sizes.len();
    let su = judge_sums(labels, k, u);
    let sv = judge_sums(labels, k, v);
    let mut diag = vec![T::zero(); k];
    for ((&l, &a), &b) in labels.iter().zip(u).zip(v) {
        diag[l] = diag[l] + a * b;
    }
    (0..k)
        .map(|j| weight(sizes[j]) * (su[j] * sv[j] - diag[j]))
        .sum()
}

/// Free-function form of [`ProjectionContext::quadratic_form`].
pub fn quadratic_form_q<T: Scalar>(ctx: &ProjectionContext<T>, a: &[T], b: &[T]) -> Result<T> {
    ctx.quadratic_form(a, b)
}

/// Free-function form of [`ProjectionContext::cross_moment`].
pub fn cross_moment_b<T: Scalar>(
    ctx: &ProjectionContext<T>,
    a: &[T],
    b: &[T],
    c: &[T],
    d: &[T],
) -> Result<T> {
    ctx.cross_moment(a, b, c, d)
}
