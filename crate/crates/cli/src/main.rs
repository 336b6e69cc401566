use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mwiv::critval::{build_vtfo_curve, write_curves, CriticalValueCurve};
use mwiv::inference::{invert_confidence_set, run_test_on, Grid, Method};
use mwiv::judge_dgp::{simulate_judge_data, JudgeDesignSpec};
use mwiv::power_lab::{rejection_rates, AsymptoticDgp};
use mwiv::{
    build_projection, load_two_sided_table, CriticalValues, CurveBuildConfig, CurveCache, Dataset,
    Error, JiveProblem,
};

#[derive(Parser)]
#[command(
    name = "mwiv",
    version,
    about = "JIVE inference with many weak instruments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// JIVE estimate, jackknife variance and ν̂ (and t̂² at --beta0).
    Estimate(EstimateArgs),
    /// Test H0: β = β₀ with one or more methods.
    Test(TestArgs),
    /// Confidence set by inverting a test over a β₀ grid.
    Cs(CsArgs),
    /// Build one-sided critical-value curves.
    Curve(CurveArgs),
    /// Asymptotic power curves.
    Power(PowerArgs),
    /// Simulate a judge-design dataset.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct Output {
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CritArgs {
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Directory for cached curves.
    #[arg(long, env = "MWIV_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    /// Build curves in memory only.
    #[arg(long)]
    no_cache: bool,
    /// Two-sided critical-value table (rho,nu,crit CSV), needed by vtf.
    #[arg(long)]
    vtf_table: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    beta0: Option<f64>,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    beta0: f64,
    /// Comma-separated methods: vtfo, vtf, cw, ms1, ms2, lm.
    #[arg(long, default_value = "vtfo")]
    method: String,
    #[command(flatten)]
    crit: CritArgs,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct CsArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "vtfo")]
    method: String,
    /// lo:hi:n (default β̂ ± 20·√V̂ with 2001 points).
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    #[command(flatten)]
    crit: CritArgs,
    /// Per-point CSV (summary goes to stdout).
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct CurveArgs {
    /// Comma-separated |ρ| values.
    #[arg(long, default_value = "0.5", allow_hyphen_values = true)]
    rho: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    t_step: f64,
    #[arg(long, default_value_t = 0.001)]
    nu_step: f64,
    #[arg(long, default_value_t = 12.0)]
    nu_max: f64,
    #[arg(long, env = "MWIV_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    no_cache: bool,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct PowerArgs {
    #[arg(long, default_value_t = 3.0)]
    s: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    r: f64,
    #[arg(long, default_value_t = 10_000)]
    draws: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Δ grid lo:hi:n.
    #[arg(long, default_value = "-10:10:81", allow_hyphen_values = true)]
    deltas: String,
    /// Comma-separated methods (default: all; vtf only with --vtf-table).
    #[arg(long)]
    method: Option<String>,
    #[command(flatten)]
    crit: CritArgs,
    /// SVG plot of the power curves.
    #[arg(long)]
    plot: Option<PathBuf>,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 50)]
    judges: usize,
    #[arg(long, default_value_t = 40)]
    per_judge: usize,
    /// First-stage judge effects: a comma-separated list with one value per
    /// judge, or a single π that alternates between +π and −π across judges.
    #[arg(long, default_value = "0.3", allow_hyphen_values = true)]
    pi: String,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    beta: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    corr: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_e: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_v: f64,
    /// Scale judge k's errors by 0.5 + k/K.
    #[arg(long)]
    heteroskedastic: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

enum Failure {
    Lib(Error),
    Usage(String),
    ClosedPipe,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            return Failure::ClosedPipe;
        }
        Failure::Lib(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::TwoSidedTableUnavailable => 3,
        Error::RankDeficientInstruments
        | Error::InsufficientClusterSize { .. }
        | Error::UnitLeverage { .. }
        | Error::Dimension(_)
        | Error::InvalidDataset(_)
        | Error::MissingColumn(_)
        | Error::Parse(_)
        | Error::Domain(_)
        | Error::ClosedFormBoundary
        | Error::TableParse(_)
        | Error::TableGrid(_)
        | Error::InvalidDgp(_)
        | Error::InvalidDesign(_)
        | Error::Io(_) => 2,
        _ => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Test(a) => test(a),
        Command::Cs(a) => cs(a),
        Command::Curve(a) => curve(a),
        Command::Power(a) => power(a),
        Command::Simulate(a) => simulate(a),
    };
    match result {
        Ok(()) | Err(Failure::ClosedPipe) => ExitCode::SUCCESS,
        // Library writers flatten io errors to text.
        Err(Failure::Lib(Error::Io(msg))) if msg.starts_with("Broken pipe") => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn sink(out: &Output) -> Result<Box<dyn Write>, Failure> {
    Ok(match &out.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_data(path: &Path) -> Result<Dataset<f64>, Failure> {
    let file = File::open(path)
        .map_err(|e| Failure::Usage(format!("cannot open {}: {e}", path.display())))?;
    Ok(Dataset::read_csv(file)?)
}

fn check_alpha(alpha: f64) -> Outcome {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Failure::Usage(format!("--alpha {alpha} outside (0, 0.5)")));
    }
    Ok(())
}

fn parse_methods(list: &str) -> Result<Vec<Method>, Failure> {
    let mut out = Vec::new();
    for item in list.split(',').filter(|s| !s.trim().is_empty()) {
        let m: Method = item.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(Failure::Usage("no methods given".into()));
    }
    Ok(out)
}

fn default_cache_dir() -> Option<PathBuf> {
    std::env::var_os("XDG_CACHE_HOME")
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache")))
        .map(|d| d.join("mwiv"))
}

fn open_cache(dir: &Option<PathBuf>, disabled: bool) -> Result<Option<CurveCache>, Failure> {
    if disabled {
        return Ok(None);
    }
    match dir.clone().or_else(default_cache_dir) {
        Some(d) => Ok(Some(CurveCache::new(d)?)),
        None => Ok(None),
    }
}

fn critical_values(a: &CritArgs) -> Result<CriticalValues, Failure> {
    check_alpha(a.alpha)?;
    let cache = open_cache(&a.cache_dir, a.no_cache)?;
    let mut crit = CriticalValues::new(a.alpha, CurveBuildConfig::default(), cache);
    if let Some(p) = &a.vtf_table {
        crit = crit.with_two_sided(load_two_sided_table(p)?);
    }
    Ok(crit)
}

fn estimate(a: EstimateArgs) -> Outcome {
    let data = read_data(&a.data)?;
    let ctx = build_projection(&data)?;
    let problem = JiveProblem::new(&ctx, &data)?;
    let beta_hat = problem.beta_hat();
    let v = problem.variance(beta_hat)?;
    let nu = problem.q_xx() / problem.upsilon_hat().sqrt();
    let mut w = sink(&a.out)?;
    writeln!(w, "n={}", data.n())?;
    writeln!(w, "k={}", data.k())?;
    writeln!(w, "beta_hat={beta_hat}")?;
    writeln!(w, "variance={v}")?;
    writeln!(w, "std_error={}", v.sqrt())?;
    writeln!(w, "nu={nu}")?;
    if let Some(b0) = a.beta0 {
        let s = problem.normalized_stats(b0)?;
        let t2 = problem.t_squared(b0)?;
        writeln!(w, "beta0={b0}")?;
        writeln!(w, "t_squared={t2}")?;
        writeln!(w, "xi={}", s.xi)?;
        writeln!(w, "rho={}", s.rho)?;
        writeln!(w, "rho_raw={}", s.rho_raw)?;
        writeln!(w, "rho_clamped={}", s.rho_clamped)?;
        writeln!(w, "ar={}", s.ar)?;
    }
    w.flush()?;
    Ok(())
}

fn test(a: TestArgs) -> Outcome {
    let methods = parse_methods(&a.method)?;
    let crit = critical_values(&a.crit)?;
    let data = read_data(&a.data)?;
    let ctx = build_projection(&data)?;
    let problem = JiveProblem::new(&ctx, &data)?;
    let mut rows = Vec::new();
    for m in methods {
        rows.push(run_test_on(m, &problem, a.beta0, &crit)?);
    }
    let mut w = sink(&a.out)?;
    writeln!(
        w,
        "method,beta0,statistic,critical,reject,nu,rho,rho_clamped"
    )?;
    for d in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            d.method, d.beta0, d.statistic, d.critical, d.reject, d.nu, d.rho, d.rho_clamped
        )?;
    }
    w.flush()?;
    Ok(())
}

fn cs(a: CsArgs) -> Outcome {
    let methods = parse_methods(&a.method)?;
    let grid = a.grid.as_deref().map(str::parse::<Grid>).transpose()?;
    let crit = critical_values(&a.crit)?;
    let data = read_data(&a.data)?;
    let ctx = build_projection(&data)?;
    let mut sets = Vec::new();
    for m in methods {
        sets.push(invert_confidence_set(m, &ctx, &data, grid, &crit)?);
    }
    if let Some(path) = &a.out.out {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "beta0,method,statistic,critical,reject")?;
        for set in &sets {
            for (b, o) in set.grid.points().iter().zip(&set.outcomes) {
                match o {
                    Some(d) => writeln!(
                        w,
                        "{b},{},{},{},{}",
                        set.method, d.statistic, d.critical, d.reject
                    )?,
                    None => writeln!(w, "{b},{},nan,nan,false", set.method)?,
                }
            }
        }
        w.flush()?;
    }
    let stdout = io::stdout();
    let mut w = stdout.lock();
    for set in &sets {
        let intervals: Vec<String> = set
            .intervals
            .iter()
            .map(|(l, h)| format!("[{l},{h}]"))
            .collect();
        let intervals = if intervals.is_empty() {
            "empty".to_string()
        } else {
            intervals.join(";")
        };
        write!(
            w,
            "method={} alpha={} grid={}:{}:{} intervals={} unbounded={}",
            set.method, set.alpha, set.grid.lo, set.grid.hi, set.grid.n, intervals, set.unbounded
        )?;
        if let Some(pred) = set.diagnosis.predicts_unbounded() {
            write!(w, " predicted_unbounded={pred}")?;
        }
        if set.diagnosis.approximate {
            write!(w, " prediction=approximate")?;
        }
        writeln!(w, " degenerate_points={}", set.degenerate_points())?;
    }
    Ok(())
}

fn parse_rhos(list: &str) -> Result<Vec<f64>, Failure> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Usage(format!("`{s}` is not a number")))
        })
        .collect()
}

fn curve(a: CurveArgs) -> Outcome {
    check_alpha(a.alpha)?;
    let cfg = CurveBuildConfig {
        t_grid_step: a.t_step,
        nu_grid_step: a.nu_step,
        nu_max: a.nu_max,
        ..CurveBuildConfig::default()
    };
    cfg.validate()?;
    let rhos = parse_rhos(&a.rho)?;
    if rhos.is_empty() {
        return Err(Failure::Usage("no --rho values".into()));
    }
    let cache = open_cache(&a.cache_dir, a.no_cache)?;
    let mut curves: Vec<CriticalValueCurve> = Vec::new();
    for &r in &rhos {
        let c = match &cache {
            Some(cache) => cache.get_or_build(r, a.alpha, &cfg),
            None => build_vtfo_curve(r, a.alpha, &cfg),
        }?;
        if !curves.iter().any(|x| x.rho_abs() == c.rho_abs()) {
            curves.push(c);
        }
    }
    let refs: Vec<&CriticalValueCurve> = curves.iter().collect();
    let mut w = sink(&a.out)?;
    write_curves(&refs, &mut w)?;
    w.flush()?;
    Ok(())
}

fn power(a: PowerArgs) -> Outcome {
    let crit = critical_values(&a.crit)?;
    let methods = match &a.method {
        Some(list) => parse_methods(list)?,
        None => Method::ALL
            .into_iter()
            .filter(|&m| m != Method::Vtf || crit.two_sided.is_some())
            .collect(),
    };
    let grid: Grid = a.deltas.parse()?;
    let dgp = AsymptoticDgp::new(a.s, a.r)?;
    let result = rejection_rates(&dgp, &grid.points(), &methods, a.draws, &crit, a.seed)?;
    let mut w = sink(&a.out)?;
    result.write_csv(&mut w)?;
    w.flush()?;
    if let Some(p) = &a.plot {
        let mut f = BufWriter::new(File::create(p)?);
        result.write_svg(&mut f)?;
        f.flush()?;
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Outcome {
    let values = parse_rhos(&a.pi)?;
    let pi = match values.len() {
        1 => (0..a.judges)
            .map(|k| if k % 2 == 0 { values[0] } else { -values[0] })
            .collect(),
        n if n == a.judges => values,
        n => {
            return Err(Failure::Usage(format!(
                "--pi has {n} values for {} judges",
                a.judges
            )))
        }
    };
    let judge_scale = a.heteroskedastic.then(|| {
        (0..a.judges)
            .map(|k| 0.5 + k as f64 / a.judges as f64)
            .collect()
    });
    let spec = JudgeDesignSpec {
        per_judge: vec![a.per_judge; a.judges],
        pi,
        beta: a.beta,
        error_corr: a.corr,
        sigma_e: a.sigma_e,
        sigma_v: a.sigma_v,
        judge_scale,
        seed: a.seed,
    };
    let data = simulate_judge_data(&spec)?;
    let mut w = sink(&a.out)?;
    data.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}
