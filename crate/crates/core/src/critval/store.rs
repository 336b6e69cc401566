//! On-disk curve cache and the lazily built |ρ| grid used by the tests.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::critval::curve::{read_curves, write_curves, CriticalValueCurve, TwoSidedTable};
use crate::critval::vtfo::{build_vtfo_curve, CurveBuildConfig, RHO_MAX};
use crate::error::{Error, Result};

/// Bumped whenever the construction changes in a way that alters knots.
const FORMAT_TAG: &str = "vtfo-v1";

/// Curves cached as CSV files named by a hash of (ρ, α, build config).
#[derive(Debug, Clone)]
pub struct CurveCache {
    dir: PathBuf,
}

impl CurveCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(rho_abs: f64, alpha: f64, cfg: &CurveBuildConfig) -> String {
        let text = format!(
            "{FORMAT_TAG}|rho={rho_abs:e}|alpha={alpha:e}|t={:e}|nu={:e}|max={:e}|tol={:e}|it={}",
            cfg.t_grid_step, cfg.nu_grid_step, cfg.nu_max, cfg.root_tolerance, cfg.max_iterations
        );
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn path_for(&self, rho_abs: f64, alpha: f64, cfg: &CurveBuildConfig) -> PathBuf {
        self.dir.join(format!(
            "vtfo-{}.csv",
            &Self::key(rho_abs, alpha, cfg)[..24]
        ))
    }

    /// Reads a cached curve, or builds and stores it. A cache file that no
    /// longer parses is rebuilt.
    pub fn get_or_build(
        &self,
        rho: f64,
        alpha: f64,
        cfg: &CurveBuildConfig,
    ) -> Result<CriticalValueCurve> {
        let rho_abs = rho.abs();
        let path = self.path_for(rho_abs, alpha, cfg);
        if let Ok(file) = File::open(&path) {
            if let Ok(mut curves) = read_curves(file) {
                if curves.len() == 1 && curves[0].rho_abs() == rho_abs {
                    return Ok(curves.pop().unwrap());
                }
            }
        }
        let curve = build_vtfo_curve(rho_abs, alpha, cfg)?;
        self.store(&path, &curve)?;
        Ok(curve)
    }

    fn store(&self, path: &Path, curve: &CriticalValueCurve) -> Result<()> {
        let tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        {
            let mut w = BufWriter::new(tmp.as_file());
            write_curves(&[curve], &mut w)?;
            w.flush()?;
        }
        tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
        Ok(())
    }
}

/// Grid value used for an estimated |ρ|: the next 0.01 step at or above it,
/// with everything past 0.99 mapped to 0.9999.
pub fn grid_rho(rho: f64) -> f64 {
    let idx = grid_index(rho);
    index_to_rho(idx)
}

fn grid_index(rho: f64) -> usize {
    let r = rho.abs().min(RHO_MAX);
    let step = (r * 100.0 - 1e-9).ceil().max(0.0) as usize;
    step.min(100)
}

fn index_to_rho(idx: usize) -> f64 {
    if idx >= 100 {
        RHO_MAX
    } else {
        idx as f64 / 100.0
    }
}

/// Every |ρ| value of the default grid: 0.00, 0.01, …, 0.99, 0.9999.
pub fn default_rho_grid() -> Vec<f64> {
    (0..=100).map(index_to_rho).collect()
}

type Slot = Arc<OnceLock<std::result::Result<Arc<CriticalValueCurve>, Error>>>;

/// One-sided curves on the |ρ| grid, built on first use. Distinct grid points
/// build concurrently; each is built once.
#[derive(Debug)]
pub struct VtfoCurves {
    alpha: f64,
    cfg: CurveBuildConfig,
    cache: Option<CurveCache>,
    slots: Mutex<HashMap<usize, Slot>>,
}

impl VtfoCurves {
    pub fn new(alpha: f64, cfg: CurveBuildConfig, cache: Option<CurveCache>) -> Self {
        Self {
            alpha,
            cfg,
            cache,
            slots: Mutex::new(HashMap::new()),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn config(&self) -> &CurveBuildConfig {
        &self.cfg
    }

    /// Curve at the grid point at or above |ρ|.
    pub fn curve_for(&self, rho: f64) -> Result<Arc<CriticalValueCurve>> {
        let idx = grid_index(rho);
        let slot = {
            let mut map = self.slots.lock().expect("curve map poisoned");
            map.entry(idx).or_default().clone()
        };
        slot.get_or_init(|| {
            let r = index_to_rho(idx);
            let curve = match &self.cache {
                Some(cache) => cache.get_or_build(r, self.alpha, &self.cfg),
                None => build_vtfo_curve(r, self.alpha, &self.cfg),
            };
            curve.map(Arc::new)
        })
        .clone()
    }

    /// Builds the grid points covering `rhos` in parallel.
    pub fn prefetch(&self, rhos: &[f64]) -> Result<()> {
        let mut idx: Vec<usize> = rhos.iter().map(|&r| grid_index(r)).collect();
        idx.sort_unstable();
        idx.dedup();
        idx.par_iter()
            .map(|&i| self.curve_for(index_to_rho(i)).map(|_| ()))
            .collect()
    }

    pub fn critical_value(&self, nu: f64, rho: f64) -> Result<f64> {
        Ok(self.curve_for(rho)?.evaluate(nu))
    }
}

/// Critical-value sources a test run may need.
#[derive(Debug)]
pub struct CriticalValues {
    pub vtfo: VtfoCurves,
    pub two_sided: Option<TwoSidedTable>,
}

impl CriticalValues {
    pub fn new(alpha: f64, cfg: CurveBuildConfig, cache: Option<CurveCache>) -> Self {
        Self {
            vtfo: VtfoCurves::new(alpha, cfg, cache),
            two_sided: None,
        }
    }

    pub fn with_two_sided(mut self, table: TwoSidedTable) -> Self {
        self.two_sided = Some(table);
        self
    }

    pub fn alpha(&self) -> f64 {
        self.vtfo.alpha()
    }
}

/// A point where a curve at larger |ρ| lies below one at smaller |ρ|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityViolation {
    pub nu: f64,
    pub rho_low: f64,
    pub rho_high: f64,
    pub c_low: f64,
    pub c_high: f64,
}

/// Checks whether c(ν, |ρ|) is nondecreasing in |ρ| at each ν of `nu_grid`,
/// for curves given in increasing |ρ| order.
pub fn rho_monotonicity_violations(
    curves: &[&CriticalValueCurve],
    nu_grid: &[f64],
) -> Vec<MonotonicityViolation> {
    let mut out = Vec::new();
    for pair in curves.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        for &nu in nu_grid {
            let (ca, cb) = (a.evaluate(nu), b.evaluate(nu));
            if ca.is_finite() && cb < ca {
                out.push(MonotonicityViolation {
                    nu,
                    rho_low: a.rho_abs(),
                    rho_high: b.rho_abs(),
                    c_low: ca,
                    c_high: cb,
                });
            }
        }
    }
    out
}
