//! Acceptance checks. Prints one `[PASS]`/`[FAIL]` line per criterion (with
//! indented detail lines) and exits non-zero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use common::quadrature::acceptance_probability;
use common::{random_judge_data, random_vector, residual, DenseOracle};
use mwiv::critval::{build_vtfo_curve_traced, fixed_point};
use mwiv::judge_dgp::simulate_replication;
use mwiv::{
    analytic_power_bounds, build_projection, invert_confidence_set, rejection_rates, AsymptoticDgp,
    CriticalValues, CurveBuildConfig, Grid, JiveProblem, JudgeDesignSpec, Method,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ALPHA: f64 = 0.05;

struct Report {
    id: u32,
    title: &'static str,
    pass: bool,
    details: Vec<String>,
}

impl Report {
    fn new(id: u32, title: &'static str) -> Self {
        Self {
            id,
            title,
            pass: true,
            details: Vec::new(),
        }
    }

    /// Records one sub-check.
    fn check(&mut self, ok: bool, msg: String) {
        self.pass &= ok;
        self.details
            .push(format!("{} {msg}", if ok { "ok  " } else { "FAIL" }));
    }

    fn note(&mut self, msg: String) {
        self.details.push(format!("note {msg}"));
    }

    fn runtime(&mut self, start: Instant, limit: Duration) {
        let took = start.elapsed();
        self.check(
            took < limit,
            format!(
                "runtime {:.1}s (limit {}s)",
                took.as_secs_f64(),
                limit.as_secs()
            ),
        );
    }

    fn print(&self) {
        let tag = if self.pass { "[PASS]" } else { "[FAIL]" };
        println!("{tag} {}. {}", self.id, self.title);
        for d in &self.details {
            println!("       {d}");
        }
    }
}

fn crit() -> CriticalValues {
    CriticalValues::new(ALPHA, CurveBuildConfig::default(), None)
}

/// (β̂ − β₀)²/V̂ against ν²ξ²/(ν² − 2ρξν + ξ²) on random judge designs.
fn t_statistic_identity() -> Report {
    let mut r = Report::new(
        1,
        "t-statistic identity on 100 random judge datasets x 5 beta0",
    );
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut datasets, mut skipped, mut worst) = (0, 0, 0.0f64);
    let mut seed = 0u64;
    while datasets < 100 {
        seed += 1;
        let k = rng.random_range(5..=25);
        let d = random_judge_data(seed, k, 20, rng.random_range(0.1..1.5));
        assert!(d.n() <= 500 && d.k() <= 25);
        let ctx = build_projection(&d).unwrap();
        let Ok(p) = JiveProblem::new(&ctx, &d) else {
            skipped += 1;
            continue;
        };
        let beta_hat = p.beta_hat();
        let Ok(v) = p.variance(beta_hat) else {
            skipped += 1;
            continue;
        };
        let beta0s: Vec<f64> = (0..5)
            .map(|_| beta_hat + rng.random_range(-3.0..3.0))
            .collect();
        let stats: Vec<_> = beta0s.iter().map(|&b| p.normalized_stats(b)).collect();
        if stats.iter().any(Result::is_err) {
            skipped += 1;
            continue;
        }
        for (b, s) in beta0s.iter().zip(stats) {
            let s = s.unwrap();
            let direct = (beta_hat - b).powi(2) / v;
            let (xi, nu, rho) = (s.xi, s.nu, s.rho_raw);
            let closed = nu * nu * xi * xi / (nu * nu - 2.0 * rho * xi * nu + xi * xi);
            worst = worst.max((direct - closed).abs() / direct.abs().max(1e-300));
        }
        datasets += 1;
    }
    r.check(
        worst <= 1e-8,
        format!("max relative gap {worst:.2e} (tol 1e-8)"),
    );
    r.note(format!(
        "{skipped} draws redrawn because a variance estimate was nonpositive"
    ));
    r.runtime(start, Duration::from_secs(10));
    r
}

fn curve_size() -> Report {
    let mut r = Report::new(2, "conditional size of VtFo curves by quadrature");
    let start = Instant::now();
    let cfg = CurveBuildConfig::default();
    for rho in [0.3, 0.5, 0.9] {
        let (curve, state) = build_vtfo_curve_traced(rho, ALPHA, &cfg).unwrap();
        let state = state.unwrap();
        let t_tilde = state.t_tilde;
        let t_max = 12.0 - 6.0 * rho;
        let mut ts: Vec<f64> = (1..=8).map(|i| t_tilde * i as f64 / 9.0).collect();
        let n_closed = ts.len();
        ts.extend((0..=16).map(|i| t_tilde + 0.01 + (t_max - t_tilde - 0.01) * i as f64 / 16.0));
        let worst = ts
            .iter()
            .map(|&t| (acceptance_probability(&curve, t) - (1.0 - ALPHA)).abs())
            .fold(0.0, f64::max);
        r.check(
            worst <= 1e-4,
            format!(
                "rho={rho}: {n_closed} T below tangency {t_tilde:.3}, {} above; max |P(accept) - 0.95| = {worst:.1e}",
                ts.len() - n_closed
            ),
        );
    }
    r.runtime(start, Duration::from_secs(30));
    r
}

fn fixed_points_and_tail() -> Report {
    let mut r = Report::new(3, "curve fixed points and tail");
    let z = 1.6448536269514722;
    let cfg = CurveBuildConfig::default();
    for (rho, printed) in [(0.5, (0.8224, 0.9018)), (0.9, (1.4804, 11.533))] {
        let curve = build_vtfo_curve_traced(rho, ALPHA, &cfg).unwrap().0;
        let (nu0, c0) = (curve.nu()[0], curve.crit()[0]);
        // Independent of the builder: (|ρ|z, ρ²z²/(1 − ρ²)).
        let want = (rho * z, rho * rho * z * z / (1.0 - rho * rho));
        let gap = (nu0 - want.0).abs().max((c0 - want.1).abs());
        r.check(
            gap <= 1e-6,
            format!(
                "rho={rho}: first knot ({nu0:.6}, {c0:.6}), formula ({:.6}, {:.6})",
                want.0, want.1
            ),
        );
        let lib = fixed_point(rho, ALPHA).unwrap();
        r.check(
            (lib.0 - want.0).abs() <= 1e-12 && (lib.1 - want.1).abs() <= 1e-12,
            format!("rho={rho}: fixed_point agrees with the formula"),
        );
        // The quoted values are rounded, so compare at half a unit in the last digit.
        let half = |v: f64| {
            let s = format!("{v}");
            let digits = s.split('.').nth(1).map_or(0, str::len) as i32;
            0.5 * 10f64.powi(-digits)
        };
        let ok =
            (nu0 - printed.0).abs() <= half(printed.0) && (c0 - printed.1).abs() <= half(printed.1);
        r.check(
            ok,
            format!(
                "rho={rho}: first knot rounds to quoted ({}, {})",
                printed.0, printed.1
            ),
        );
        let last = *curve.crit().last().unwrap();
        let end = *curve.nu().last().unwrap();
        r.check(
            (last - 3.8415).abs() <= 0.02,
            format!("rho={rho}: c({end:.3}) = {last:.4}, target 3.8415 +/- 0.02"),
        );
    }
    r
}

fn null_size() -> Report {
    let mut r = Report::new(4, "unconditional null size, 1e5 draws per (S, rho)");
    let c = crit();
    for s in [0.0, 1.0, 3.0, 5.0] {
        for rho in [0.3, 0.9] {
            let dgp = AsymptoticDgp::null_pair(s, rho).unwrap();
            let res =
                rejection_rates(&dgp, &[0.0], &[Method::Vtfo, Method::Cw], 100_000, &c, 7).unwrap();
            for m in [Method::Vtfo, Method::Cw] {
                let rate = res.rate(m, 0).unwrap();
                r.check(
                    (rate - ALPHA).abs() <= 0.01,
                    format!("S={s} rho={rho} {m}: {rate:.4}"),
                );
            }
        }
    }
    r
}

fn power_bounds() -> Report {
    let mut r = Report::new(5, "power at |Delta| = 8 against the analytic bounds, S = 3");
    let c = crit();
    let (one, two) = analytic_power_bounds(3.0, ALPHA);
    r.check(
        (one - 0.9123).abs() < 5e-5 && (two - 0.8508).abs() < 5e-5,
        format!("bounds one-sided {one:.5}, two-sided {two:.5}"),
    );
    let ordered = [0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0]
        .iter()
        .all(|&s| analytic_power_bounds(s, ALPHA).0 > analytic_power_bounds(s, ALPHA).1);
    r.check(
        ordered,
        "one-sided bound exceeds two-sided bound for S in [0.25, 8]".into(),
    );
    let dgp = AsymptoticDgp::new(3.0, 0.5).unwrap();
    let methods = [Method::Vtfo, Method::Ms1, Method::Ms2, Method::Lm];
    let deltas = [-8.0, 8.0, -1000.0, 1000.0];
    let res = rejection_rates(&dgp, &deltas, &methods, 100_000, &c, 11).unwrap();
    for m in methods {
        let bound = res.bound_for(m);
        for (i, &d) in deltas.iter().enumerate() {
            let rate = res.rate(m, i).unwrap();
            let msg = format!("{m} Delta={d}: {rate:.4} vs bound {bound:.4}");
            if d.abs() == 8.0 {
                r.check((rate - bound).abs() <= 0.01, msg);
            } else {
                r.note(format!("supplementary {msg}"));
            }
        }
    }
    r
}

fn figure_reproduction() -> Report {
    let mut r = Report::new(6, "power curves at r = 0.5, S = 3, 10,000 draws");
    let start = Instant::now();
    let c = crit();
    let dgp = AsymptoticDgp::new(3.0, 0.5).unwrap();
    let methods = [
        Method::Vtfo,
        Method::Cw,
        Method::Ms1,
        Method::Ms2,
        Method::Lm,
    ];
    r.note("vtf needs an external two-sided table and is not part of this run".into());
    let fine = Grid::new(-10.0, 10.0, 401).unwrap().points();
    let res = rejection_rates(&dgp, &fine, &methods, 10_000, &c, 5).unwrap();
    let idx = |d: f64| fine.iter().position(|&x| (x - d).abs() < 1e-9).unwrap();
    for m in methods {
        let rates = res.rates(m).unwrap();
        let size = rates[idx(0.0)];
        r.check((size - ALPHA).abs() <= 0.01, format!("{m}: size {size:.4}"));
        // Under continuity the largest change between neighbouring Δ values
        // shrinks with the step; a jump would not.
        let jump = |step: usize| {
            rates
                .iter()
                .step_by(step)
                .collect::<Vec<_>>()
                .windows(2)
                .map(|w| (w[1] - w[0]).abs())
                .fold(0.0, f64::max)
        };
        let (j4, j2, j1) = (jump(4), jump(2), jump(1));
        r.check(
            j2 <= 0.75 * j4 && j1 <= 0.75 * j2,
            format!("{m}: max change between neighbours {j4:.4} / {j2:.4} / {j1:.4} at steps 0.2 / 0.1 / 0.05"),
        );
    }
    let (vt, ms) = (
        res.rates(Method::Vtfo).unwrap(),
        res.rates(Method::Ms1).unwrap(),
    );
    let wins: Vec<bool> = [-1.0, 1.0]
        .iter()
        .map(|&d| vt[idx(d)] > ms[idx(d)])
        .collect();
    r.check(
        wins.iter().filter(|&&w| w).count() == 1,
        format!(
            "VtFo vs MS1 at Delta=-1: {:.4} vs {:.4}; at Delta=+1: {:.4} vs {:.4} (needs exactly one sign)",
            vt[idx(-1.0)],
            ms[idx(-1.0)],
            vt[idx(1.0)],
            ms[idx(1.0)]
        ),
    );
    r.runtime(start, Duration::from_secs(120));
    r
}

fn unboundedness() -> Report {
    let mut r = Report::new(7, "unboundedness of AR sets matches the first-stage rules");
    let c = crit();
    let grid = Grid::new(-1e6, 1e6, 401).unwrap();
    let q2 = 3.84;
    let z1 = 1.645;
    // 200 datasets over ν̂ ∈ (0, 6): one grid step is 0.03 in ν̂ units.
    let step = 6.0 / 200.0;
    let (mut n, mut tries) = (0, 0u64);
    let (mut ms2_agree, mut ms1_agree, mut ms1_exact) = (0, 0, 0);
    let (mut ms2_far, mut ms1_far) = (Vec::new(), Vec::new());
    let mut nus = Vec::new();
    while n < 200 {
        tries += 1;
        // π spread so that ν̂ covers (0, 6).
        let pi = 0.42 * ((tries % 211) as f64 / 210.0).sqrt();
        let mut spec = JudgeDesignSpec::balanced(40, 10, 0.0, 1.0, 0.5, 9000 + tries);
        spec.pi = (0..40).map(|j| if j % 2 == 0 { pi } else { -pi }).collect();
        let d = simulate_replication(&spec, 0).unwrap();
        let ctx = build_projection(&d).unwrap();
        let p = JiveProblem::new(&ctx, &d).unwrap();
        if !(p.upsilon_hat() > 0.0) {
            continue;
        }
        let nu = p.q_xx() / p.upsilon_hat().sqrt();
        if !(nu > 0.0 && nu < 6.0) {
            continue;
        }
        let (Ok(cs2), Ok(cs1)) = (
            invert_confidence_set(Method::Ms2, &ctx, &d, Some(grid), &c),
            invert_confidence_set(Method::Ms1, &ctx, &d, Some(grid), &c),
        ) else {
            continue;
        };
        n += 1;
        nus.push(nu);
        let (qxx, b) = (p.q_xx(), p.b_xxxx());
        let rule2 = qxx * qxx <= q2 * b;
        if cs2.unbounded == rule2 {
            ms2_agree += 1;
        } else if (qxx / b.sqrt() - q2.sqrt()).abs() > step {
            ms2_far.push(nu);
        }
        let rule1 = nu <= z1;
        if cs1.unbounded == rule1 {
            ms1_agree += 1;
        } else if (nu - z1).abs() > step {
            ms1_far.push(nu);
        }
        if cs1.unbounded == (b > 0.0 && qxx <= z1 * b.sqrt()) {
            ms1_exact += 1;
        }
    }
    let lo = nus.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = nus.iter().cloned().fold(0.0, f64::max);
    r.note(format!(
        "{n} datasets, nu_hat in [{lo:.2}, {hi:.2}], grid +/-1e6 with 401 points"
    ));
    r.check(
        ms2_agree as f64 >= 0.99 * n as f64 && ms2_far.is_empty(),
        format!(
            "MS2 vs Q_XX^2 <= 3.84 B_XXXX: {ms2_agree}/{n} agree, {} more than one step away",
            ms2_far.len()
        ),
    );
    r.check(
        ms1_agree as f64 >= 0.99 * n as f64 && ms1_far.is_empty(),
        format!(
            "MS1 vs nu_hat <= 1.645: {ms1_agree}/{n} agree, {} more than one step away {ms1_far:.3?}",
            ms1_far.len()
        ),
    );
    r.note(format!(
        "MS1 vs its exact limit Q_XX <= 1.645 sqrt(B_XXXX): {ms1_exact}/{n} agree"
    ));
    r
}

fn oracle_equivalence() -> Report {
    let mut r = Report::new(8, "judge fast path vs dense reference vs brute force");
    let mut worst = 0.0f64;
    let mut cases = 0;
    let mut track = |a: f64, b: f64| {
        worst = worst.max((a - b).abs() / 1f64.max(a.abs()).max(b.abs()));
    };
    for seed in 0..20u64 {
        let d = random_judge_data(500 + seed, 6 + (seed as usize % 10), 20, 0.8);
        assert!(d.n() <= 200);
        let dense = d.to_dense();
        let fast_ctx = build_projection(&d).unwrap();
        let dense_ctx = build_projection(&dense).unwrap();
        let oracle = DenseOracle::new(&d);
        let (y, x) = (d.y(), d.x());
        let u = random_vector(seed, d.n());
        for (a, b) in [(x, x), (x, y), (y, y), (&u[..], y)] {
            let q = fast_ctx.quadratic_form(a, b).unwrap();
            track(q, dense_ctx.quadratic_form(a, b).unwrap());
            track(q, oracle.q(a, b));
            let bb = fast_ctx.cross_moment(a, b, b, a).unwrap();
            track(bb, dense_ctx.cross_moment(a, b, b, a).unwrap());
            track(bb, oracle.b(a, b, b, a));
        }
        let (Ok(pf), Ok(pd)) = (
            JiveProblem::new(&fast_ctx, &d),
            JiveProblem::new(&dense_ctx, &dense),
        ) else {
            continue;
        };
        track(pf.upsilon_hat(), pd.upsilon_hat());
        track(pf.upsilon_hat(), oracle.upsilon(x));
        if let (Ok(vf), Ok(vd)) = (pf.variance(pf.beta_hat()), pd.variance(pd.beta_hat())) {
            track(vf, vd);
            track(vf, oracle.variance(y, x));
        }
        for beta0 in [-1.0, 0.0, 2.0] {
            let (Ok(a), Ok(b)) = (
                pf.variance_estimates_at(beta0),
                pd.variance_estimates_at(beta0),
            ) else {
                continue;
            };
            let e = residual(y, x, beta0);
            for (f, g, o) in [
                (a.tau_hat, b.tau_hat, oracle.tau(x, &e)),
                (a.psi_hat, b.psi_hat, oracle.psi(x, &e, &e)),
                (a.phi_hat, b.phi_hat, oracle.b(&e, &e, &e, &e)),
            ] {
                track(f, g);
                track(f, o);
            }
        }
        cases += 1;
    }
    r.check(
        worst <= 1e-10,
        format!("{cases} datasets (N <= 200): max relative gap {worst:.2e}"),
    );
    r
}

fn cli_determinism() -> Report {
    let mut r = Report::new(9, "CLI commands are byte-reproducible");
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    let bin = env!("CARGO_BIN_EXE_mwiv");
    let p = |name: &str| base.join(name).to_str().unwrap().to_string();
    let run = |args: &[String]| -> Option<Vec<u8>> {
        let out = Command::new(bin)
            .args(args)
            .env("MWIV_CACHE_DIR", base.join("cache"))
            .output()
            .ok()?;
        out.status.success().then_some(out.stdout)
    };
    let data = p("data.csv");
    let first_sim = run(&[
        "simulate".into(),
        "--seed".into(),
        "5".into(),
        "--out".into(),
        data.clone(),
    ]);
    let table = p("table.csv");
    let _ = run(&[
        "curve".into(),
        "--rho".into(),
        "0,0.5,0.9".into(),
        "--out".into(),
        table.clone(),
    ]);
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<String>>();
    let commands: Vec<(&str, Vec<String>, Vec<String>)> = vec![
        (
            "simulate",
            s(&[
                "simulate",
                "--seed",
                "5",
                "--heteroskedastic",
                "--out",
                &p("sim.csv"),
            ]),
            vec![p("sim.csv")],
        ),
        (
            "estimate",
            s(&["estimate", "--data", &data, "--beta0", "0.4"]),
            vec![],
        ),
        (
            "test",
            s(&[
                "test",
                "--data",
                &data,
                "--beta0",
                "0.4",
                "--method",
                "vtfo,vtf,cw,ms1,ms2,lm",
                "--vtf-table",
                &table,
            ]),
            vec![],
        ),
        (
            "cs",
            s(&[
                "cs",
                "--data",
                &data,
                "--method",
                "vtfo,cw,ms2",
                "--out",
                &p("cs.csv"),
            ]),
            vec![p("cs.csv")],
        ),
        (
            "curve",
            s(&["curve", "--rho", "0.3,0.75", "--no-cache"]),
            vec![],
        ),
        (
            "power",
            s(&[
                "power",
                "--draws",
                "2000",
                "--seed",
                "3",
                "--plot",
                &p("power.svg"),
                "--out",
                &p("power.csv"),
            ]),
            vec![p("power.csv"), p("power.svg")],
        ),
    ];
    r.check(
        first_sim.is_some(),
        "setup: simulate and curve table".into(),
    );
    for (name, args, files) in commands {
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let Some(stdout) = run(&args) else {
                outputs.push(None);
                continue;
            };
            let mut bytes = stdout;
            for f in &files {
                bytes.extend(std::fs::read(f).unwrap_or_default());
                let _ = std::fs::remove_file(f);
            }
            outputs.push(Some(bytes));
        }
        let same = outputs[0].is_some() && outputs[0] == outputs[1];
        let size = outputs[0].as_ref().map_or(0, Vec::len);
        r.check(same, format!("{name}: two runs identical ({size} bytes)"));
    }
    r
}

fn main() {
    // `cargo test` passes harness flags; a name filter that excludes this
    // target's name skips it.
    let args: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    let checks: [fn() -> Report; 9] = [
        t_statistic_identity,
        curve_size,
        fixed_points_and_tail,
        null_size,
        power_bounds,
        figure_reproduction,
        unboundedness,
        oracle_equivalence,
        cli_determinism,
    ];
    let mut failed = Vec::new();
    for check in checks {
        let report = check();
        report.print();
        if !report.pass {
            failed.push(report.id);
        }
    }
    println!();
    if failed.is_empty() {
        println!("acceptance: all 9 criteria pass");
    } else {
        println!(
            "acceptance: {} of 9 criteria fail: {failed:?}",
            failed.len()
        );
        std::process::exit(1);
    }
}
