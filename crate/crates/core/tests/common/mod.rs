//! Shared test fixtures: random datasets and a brute-force dense oracle that
//! recomputes every statistic from an explicit inverse of Z'Z.

#![allow(dead_code)]

pub mod quadrature;

use mwiv::{Dataset, DenseMatrix, Instruments};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller keeps the fixtures independent of the library's samplers.
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Judge data with random cluster sizes in `2..=max_size`, heteroskedastic
/// errors and first stage of scale `pi_scale`.
pub fn random_judge_data(seed: u64, k: usize, max_size: usize, pi_scale: f64) -> Dataset<f64> {
    let mut r = rng(seed);
    let (mut y, mut x, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    for j in 0..k {
        let size = r.random_range(2..=max_size);
        let pi = pi_scale * normal(&mut r);
        let h = 0.5 + r.random::<f64>();
        for _ in 0..size {
            let v = h * normal(&mut r);
            let e = 0.6 * v + h * normal(&mut r);
            x.push(pi + v);
            y.push(0.7 * (pi + v) + e);
            labels.push(j as i64 * 3 + 11);
        }
    }
    Dataset::judges(y, x, &labels).unwrap()
}

/// Dense Gaussian instruments.
pub fn random_dense_data(seed: u64, n: usize, k: usize) -> Dataset<f64> {
    let mut r = rng(seed);
    let z: Vec<f64> = (0..n * k).map(|_| normal(&mut r)).collect();
    let zm = DenseMatrix::from_row_major(n, k, z.clone()).unwrap();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let signal: f64 = z[i * k..(i + 1) * k].iter().sum::<f64>() * 0.4;
        let v = normal(&mut r);
        let e = 0.5 * v + normal(&mut r);
        x.push(signal + v);
        y.push(-0.3 * (signal + v) + e);
    }
    Dataset::dense(y, x, zm).unwrap()
}

pub fn random_vector(seed: u64, n: usize) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| normal(&mut r)).collect()
}

pub struct DenseOracle {
    pub p: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub k: usize,
    pub n: usize,
}

impl DenseOracle {
    pub fn new(data: &Dataset<f64>) -> Self {
        let dense = data.to_dense();
        let Instruments::Dense(z) = dense.instruments() else {
            unreachable!()
        };
        let (n, k) = (z.rows(), z.cols());
        let zm = DMatrix::from_fn(n, k, |i, j| z.get(i, j));
        let ztz_inv = (zm.transpose() * &zm)
            .try_inverse()
            .expect("Z'Z invertible");
        let p = &zm * ztz_inv * zm.transpose();
        let m = DMatrix::identity(n, n) - &p;
        Self { p, m, k, n }
    }

    fn p_tilde_sq(&self, i: usize, j: usize) -> f64 {
        let p = self.p[(i, j)];
        p * p / (self.m[(i, i)] * self.m[(j, j)] + self.m[(i, j)].powi(2))
    }

    fn m_times(&self, b: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.m[(i, j)] * b[j]).sum())
            .collect()
    }

    pub fn q(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    s += self.p[(i, j)] * a[i] * b[j];
                }
            }
        }
        s / (self.k as f64).sqrt()
    }

    pub fn b(&self, a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> f64 {
        let mb = self.m_times(b);
        let md = self.m_times(d);
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    s += self.p_tilde_sq(i, j) * a[i] * mb[i] * c[j] * md[j];
                }
            }
        }
        2.0 * s / self.k as f64
    }

    /// The heteroskedasticity-robust bilinear form written term by term:
    /// (1/K)[Σᵢ (Σ_{j≠i} Pᵢⱼxⱼ)² aᵢ(Mb)ᵢ/Mᵢᵢ + ΣᵢΣ_{j≠i} P̃²ᵢⱼ (Mx)ᵢaᵢ(Mx)ⱼbⱼ].
    pub fn psi(&self, x: &[f64], a: &[f64], b: &[f64]) -> f64 {
        let mx = self.m_times(x);
        let mb = self.m_times(b);
        let mut first = 0.0;
        for i in 0..self.n {
            let g: f64 = (0..self.n)
                .filter(|&j| j != i)
                .map(|j| self.p[(i, j)] * x[j])
                .sum();
            first += g * g * a[i] * mb[i] / self.m[(i, i)];
        }
        let mut second = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    second += self.p_tilde_sq(i, j) * mx[i] * a[i] * mx[j] * b[j];
                }
            }
        }
        (first + second) / self.k as f64
    }

    pub fn upsilon(&self, x: &[f64]) -> f64 {
        self.psi(x, x, x)
    }

    pub fn tau(&self, x: &[f64], e: &[f64]) -> f64 {
        0.5 * (self.psi(x, x, e) + self.psi(x, e, x))
    }

    pub fn beta_hat(&self, y: &[f64], x: &[f64]) -> f64 {
        self.q(x, y) / self.q(x, x)
    }

    pub fn variance(&self, y: &[f64], x: &[f64]) -> f64 {
        let b = self.beta_hat(y, x);
        let e: Vec<f64> = y.iter().zip(x).map(|(a, c)| a - b * c).collect();
        self.psi(x, &e, &e) / self.q(x, x).powi(2)
    }
}

pub fn residual(y: &[f64], x: &[f64], beta0: f64) -> Vec<f64> {
    y.iter().zip(x).map(|(a, b)| a - beta0 * b).collect()
}

/// |a − b| ≤ tol·max(1, |a|, |b|).
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}
