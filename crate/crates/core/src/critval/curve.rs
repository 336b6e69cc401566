//! Tabulated critical-value curves and their CSV form.
//!
//! ```text
//! # alpha=0.05
//! # domain_low=0.8224268134757359 rho=0.5
//! rho,nu,crit
//! 0.5,0.8224268134757359,0.9018482...
//! ```
//!
//! Several curves may share one file; each contributes a `# domain_low=`
//! line and its rows, sorted by (rho, nu).

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};

/// c(ν) for one (|ρ|, α): piecewise linear between knots, +∞ below the
/// domain boundary, flat beyond the last knot.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalValueCurve {
    rho_abs: f64,
    alpha: f64,
    nu: Vec<f64>,
    crit: Vec<f64>,
    domain_low: f64,
}

impl CriticalValueCurve {
    pub fn new(
        rho_abs: f64,
        alpha: f64,
        nu: Vec<f64>,
        crit: Vec<f64>,
        domain_low: f64,
    ) -> Result<Self> {
        if nu.is_empty() || nu.len() != crit.len() {
            return Err(Error::TableGrid(format!(
                "{} abscissae and {} values",
                nu.len(),
                crit.len()
            )));
        }
        if let Some(w) = nu.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::TableGrid(format!(
                "nu grid not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        if crit.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::TableGrid(
                "critical values must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            rho_abs,
            alpha,
            nu,
            crit,
            domain_low,
        })
    }

    pub fn rho_abs(&self) -> f64 {
        self.rho_abs
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn domain_low(&self) -> f64 {
        self.domain_low
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn crit(&self) -> &[f64] {
        &self.crit
    }

    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nu.iter().copied().zip(self.crit.iter().copied())
    }

    pub fn evaluate(&self, nu: f64) -> f64 {
        if nu.is_nan() || nu < self.domain_low {
            return f64::INFINITY;
        }
        interpolate(&self.nu, &self.crit, nu)
    }
}

/// Linear interpolation on a strictly increasing grid, flat outside it.
pub(crate) fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let last = xs.len() - 1;
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[last] {
        return ys[last];
    }
    let hi = xs.partition_point(|&v| v <= x);
    let lo = hi - 1;
    let w = (x - xs[lo]) / (xs[hi] - xs[lo]);
    ys[lo] + w * (ys[hi] - ys[lo])
}

pub fn evaluate_critical_value(curve: &CriticalValueCurve, nu: f64) -> f64 {
    curve.evaluate(nu)
}

pub fn write_curves<W: Write>(curves: &[&CriticalValueCurve], mut w: W) -> Result<()> {
    let mut sorted: Vec<&CriticalValueCurve> = curves.to_vec();
    sorted.sort_by(|a, b| a.rho_abs.total_cmp(&b.rho_abs));
    if let Some(first) = sorted.first() {
        writeln!(w, "# alpha={}", first.alpha)?;
    }
    for c in &sorted {
        writeln!(w, "# domain_low={} rho={}", c.domain_low, c.rho_abs)?;
    }
    writeln!(w, "rho,nu,crit")?;
    for c in &sorted {
        for (nu, crit) in c.knots() {
            writeln!(w, "{},{},{}", c.rho_abs, nu, crit)?;
        }
    }
    Ok(())
}

pub fn read_curves<R: Read>(r: R) -> Result<Vec<CriticalValueCurve>> {
    let parse = |s: &str, line: usize| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::TableParse(format!("line {line}: `{s}` is not a number")))
    };
    let mut alpha = f64::NAN;
    let mut domains: Vec<(f64, f64)> = Vec::new();
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    let mut header_seen = false;
    for (idx, line) in BufReader::new(r).lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            for token in meta.split_whitespace() {
                if let Some(v) = token.strip_prefix("alpha=") {
                    alpha = parse(v, lineno)?;
                } else if let Some(v) = token.strip_prefix("domain_low=") {
                    domains.push((f64::NAN, parse(v, lineno)?));
                } else if let Some(v) = token.strip_prefix("rho=") {
                    let last = domains.last_mut().ok_or_else(|| {
                        Error::TableParse(format!("line {lineno}: rho= without domain_low="))
                    })?;
                    last.0 = parse(v, lineno)?;
                }
            }
            continue;
        }
        if !header_seen {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols != ["rho", "nu", "crit"] {
                return Err(Error::TableParse(format!(
                    "line {lineno}: expected header `rho,nu,crit`"
                )));
            }
            header_seen = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(Error::TableParse(format!(
                "line {lineno}: expected 3 fields"
            )));
        }
        rows.push((
            parse(f[0], lineno)?,
            parse(f[1], lineno)?,
            parse(f[2], lineno)?,
        ));
    }
    if rows.is_empty() {
        return Err(Error::TableParse("table has no rows".into()));
    }

    let mut curves = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let rho = rows[start].0;
        let end = start + rows[start..].iter().take_while(|r| r.0 == rho).count();
        let nu: Vec<f64> = rows[start..end].iter().map(|r| r.1).collect();
        let crit: Vec<f64> = rows[start..end].iter().map(|r| r.2).collect();
        // Without a sidecar line the table minimum is the boundary.
        let domain_low = domains
            .iter()
            .find(|d| d.0 == rho || (d.0.is_nan() && domains.len() == 1))
            .map_or(nu[0], |d| d.1);
        if let Some(prev) = curves.last().map(|c: &CriticalValueCurve| c.rho_abs) {
            if !(rho > prev) {
                return Err(Error::TableGrid(format!(
                    "rho values not increasing at {rho}"
                )));
            }
        }
        curves.push(CriticalValueCurve::new(rho, alpha, nu, crit, domain_low)?);
        start = end;
    }
    Ok(curves)
}

/// c(ν, ρ) table for the two-sided test, looked up bilinearly.
#[derive(Debug, Clone)]
pub struct TwoSidedTable {
    curves: Vec<CriticalValueCurve>,
}

impl TwoSidedTable {
    pub fn from_curves(curves: Vec<CriticalValueCurve>) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::TableParse("table has no rows".into()));
        }
        Ok(Self { curves })
    }

    pub fn curves(&self) -> &[CriticalValueCurve] {
        &self.curves
    }

    /// Linear in ν along each tabulated ρ, then linear in |ρ| between the two
    /// bracketing rows; |ρ| outside the tabulated range uses the nearest row.
    pub fn lookup(&self, nu: f64, rho: f64) -> f64 {
        let r = rho.abs();
        let cs = &self.curves;
        let hi = cs.partition_point(|c| c.rho_abs < r);
        if hi == 0 {
            return cs[0].evaluate(nu);
        }
        if hi == cs.len() {
            return cs[hi - 1].evaluate(nu);
        }
        let (a, b) = (&cs[hi - 1], &cs[hi]);
        let (ca, cb) = (a.evaluate(nu), b.evaluate(nu));
        if !ca.is_finite() || !cb.is_finite() {
            return f64::INFINITY;
        }
        let w = (r - a.rho_abs) / (b.rho_abs - a.rho_abs);
        ca + w * (cb - ca)
    }
}

pub fn load_two_sided_table(path: impl AsRef<std::path::Path>) -> Result<TwoSidedTable> {
    let file = std::fs::File::open(path.as_ref())?;
    TwoSidedTable::from_curves(read_curves(file)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CriticalValueCurve {
        CriticalValueCurve::new(0.5, 0.05, vec![1.0, 2.0, 4.0], vec![1.0, 3.0, 3.5], 1.0).unwrap()
    }

    #[test]
    fn evaluation_contract() {
        let c = sample();
        assert_eq!(c.evaluate(-1.0), f64::INFINITY);
        assert_eq!(c.evaluate(1.0), 1.0);
        assert_eq!(c.evaluate(1.5), 2.0);
        assert_eq!(c.evaluate(3.0), 3.25);
        assert_eq!(c.evaluate(100.0), 3.5);
    }

    #[test]
    fn rejects_non_monotone_grid() {
        let err = CriticalValueCurve::new(0.5, 0.05, vec![1.0, 1.0], vec![1.0, 2.0], 1.0);
        assert!(matches!(err, Err(Error::TableGrid(_))));
        let text = "rho,nu,crit\n0.5,2,1\n0.5,1,1\n";
        assert!(matches!(
            read_curves(text.as_bytes()),
            Err(Error::TableGrid(_))
        ));
    }

    #[test]
    fn empty_and_malformed_tables() {
        assert!(matches!(
            read_curves("".as_bytes()),
            Err(Error::TableParse(_))
        ));
        assert!(matches!(
            read_curves("rho,nu,crit\n".as_bytes()),
            Err(Error::TableParse(_))
        ));
        assert!(matches!(
            read_curves("a,b\n1,2\n".as_bytes()),
            Err(Error::TableParse(_))
        ));
        assert!(matches!(
            read_curves("rho,nu,crit\n0.5,x,1\n".as_bytes()),
            Err(Error::TableParse(_))
        ));
    }

    #[test]
    fn round_trip_is_exact() {
        let a = sample();
        let b = CriticalValueCurve::new(
            0.9,
            0.05,
            vec![1.5, 2.0 / 3.0 + 2.0],
            vec![11.0, 0.1 + 0.2],
            1.5,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_curves(&[&b, &a], &mut buf).unwrap();
        let back = read_curves(buf.as_slice()).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn bilinear_lookup() {
        let a = CriticalValueCurve::new(0.2, 0.05, vec![0.0, 10.0], vec![2.0, 4.0], 0.0).unwrap();
        let b = CriticalValueCurve::new(0.4, 0.05, vec![0.0, 10.0], vec![4.0, 6.0], 0.0).unwrap();
        let t = TwoSidedTable::from_curves(vec![a, b]).unwrap();
        assert!((t.lookup(5.0, -0.3) - 4.0).abs() < 1e-12);
        assert_eq!(t.lookup(-0.1, 0.3), f64::INFINITY);
        assert_eq!(t.lookup(5.0, 0.9), 5.0);
    }
}
