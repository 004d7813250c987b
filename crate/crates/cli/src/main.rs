//! `selcurse`: evaluate the penalized two-point estimator and the agent's
//! incentive to misreport from the command line.
//!
//! Exit codes: 0 success / incentive compatible, 2 usage, 3 violation found,
//! 4 I/O, 5 outside the domain of an analysis.

mod config;
mod table;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use selcurse::asymptotics::{finite_n_probe, limit_conditional_means, limit_ic_statistic};
use selcurse::estimator::fit;
use selcurse::ic::{
    bernoulli_paper_region, bernoulli_refined_region, ic_at_beta, ic_at_prior, symmetric_suite, IcReport, PriorOverBeta,
};
use selcurse::{Error, ModelParams, NoiseSpec, PenaltyParams, Sample};

use config::ConfigError;
use table::{fmt_sig, render, Cell, Format};

#[derive(Parser)]
#[command(
    name = "selcurse",
    version,
    about = "Selection threshold, misreporting incentives and their large-n limit"
)]
struct Cli {
    /// key = value file supplying defaults for any flag
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the penalized estimator to two group means
    Estimate(EstimateArgs),
    /// Expected-loss margins of both misreports; exits 3 on a violation
    Ic(IcArgs),
    /// Sweep (beta1, c0) and tabulate margins
    Region(RegionArgs),
    /// Check a set of symmetric noise laws over a grid; exits 3 on a violation
    Suite(SuiteArgs),
    /// Finite-n pivotal statistics under Bernoulli noise and their limit
    Asymptotics(AsymptoticsArgs),
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long, allow_hyphen_values = true)]
    ybar0: f64,
    #[arg(long, allow_hyphen_values = true)]
    ybar1: f64,
    #[arg(long)]
    n: u32,
    #[arg(long)]
    c0: f64,
    #[arg(long)]
    c1: f64,
}

#[derive(Args)]
struct IcArgs {
    #[arg(long)]
    noise: NoiseSpec,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    beta0: f64,
    /// Required unless --prior is given
    #[arg(long, allow_hyphen_values = true)]
    beta1: Option<f64>,
    #[arg(long)]
    c0: f64,
    #[arg(long)]
    c1: f64,
    #[arg(long, default_value_t = 1)]
    n: u32,
    /// Prior over beta: lines of `beta0,beta1,prob`
    #[arg(long, value_name = "FILE", conflicts_with = "beta1")]
    prior: Option<PathBuf>,
}

#[derive(Args)]
struct Output {
    /// Write here instead of stdout
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct RegionArgs {
    #[arg(long)]
    noise: NoiseSpec,
    /// start:stop:step, a comma list, or empty
    #[arg(long, allow_hyphen_values = true)]
    beta1_grid: String,
    #[arg(long)]
    c0_grid: String,
    #[arg(long, default_value_t = 0.0)]
    c1: f64,
    #[arg(long, default_value_t = 1)]
    n: u32,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct SuiteArgs {
    /// Repeat for several laws
    #[arg(long, required = true)]
    noise: Vec<NoiseSpec>,
    #[arg(long, allow_hyphen_values = true)]
    beta1_grid: String,
    #[arg(long)]
    c0_grid: String,
    #[arg(long, default_value = "0")]
    c1_grid: String,
}

#[derive(Args)]
struct AsymptoticsArgs {
    /// Probability of the -1 atom
    #[arg(long)]
    p: f64,
    #[arg(long, allow_hyphen_values = true)]
    beta1: f64,
    #[arg(long)]
    c0: f64,
    /// Comma-separated replicate counts
    #[arg(long)]
    n_list: String,
    #[command(flatten)]
    out: Output,
}

enum Failure {
    Usage(String),
    Io(String),
    Domain(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::Parse(_) => Failure::Usage(e.to_string()),
            Error::Domain(_) | Error::Unsupported(_) => Failure::Domain(e.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Usage(m) => Failure::Usage(m),
            ConfigError::Io(m) => Failure::Io(m),
        }
    }
}

const VIOLATION: u8 = 3;

fn main() -> ExitCode {
    let args = match config::merge_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => return report(e.into()),
    };
    let cli = Cli::try_parse_from(args).unwrap_or_else(|e| e.exit());
    let _ = cli.config;
    let result = match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Ic(a) => ic(a),
        Command::Region(a) => region(a),
        Command::Suite(a) => suite(a),
        Command::Asymptotics(a) => asymptotics(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> ExitCode {
    let (code, msg) = match f {
        Failure::Usage(m) => (2, m),
        Failure::Io(m) => (4, m),
        Failure::Domain(m) => (5, m),
    };
    eprintln!("error: {msg}");
    if code == 2 {
        eprintln!("\nFor more information, try '--help'.");
    }
    ExitCode::from(code)
}

fn estimate(a: EstimateArgs) -> Result<u8, Failure> {
    let penalty = PenaltyParams::new(a.c0, a.c1)?;
    let est = fit(&Sample::new(a.ybar0, a.ybar1, a.n)?, &penalty);
    println!("b0={}", fmt_sig(est.b0));
    println!("b1={}", fmt_sig(est.b1));
    println!("included={}", est.included);
    Ok(0)
}

fn print_ic(report: &IcReport) {
    println!("backend={:?} tolerance={}", report.backend, fmt_sig(report.tolerance));
    for d in &report.deviations {
        println!(
            "x={} r={} loss_truth={} loss_deviation={} margin={} {}",
            u8::from(d.x),
            u8::from(d.r),
            fmt_sig(d.loss_truth),
            fmt_sig(d.loss_deviation),
            fmt_sig(d.margin),
            if d.violated { "violated" } else { "ok" }
        );
    }
    println!("verdict={}", if report.ic { "IC" } else { "violated" });
}

fn ic(a: IcArgs) -> Result<u8, Failure> {
    let penalty = PenaltyParams::new(a.c0, a.c1)?;
    let report = match (&a.prior, a.beta1) {
        (Some(path), _) => {
            let atoms = config::read_prior(path)?
                .into_iter()
                .map(|(b0, b1, w)| Ok((ModelParams::new(b0, b1)?, w)))
                .collect::<Result<Vec<_>, Error>>()?;
            ic_at_prior(&PriorOverBeta::new(atoms)?, &a.noise, &penalty, a.n)?
        }
        (None, Some(beta1)) => ic_at_beta(&ModelParams::new(a.beta0, beta1)?, &a.noise, &penalty, a.n)?,
        (None, None) => return Err(Failure::Usage("ic needs --beta1 or --prior".into())),
    };
    print_ic(&report);
    Ok(if report.ic { 0 } else { VIOLATION })
}

fn emit(out: &Output, columns: &[&str], rows: &[Vec<Cell>]) -> Result<(), Failure> {
    let text = render(columns, rows, out.format);
    match &out.output {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub const REGION_COLUMNS: [&str; 7] = [
    "beta1",
    "c0",
    "margin_x1",
    "margin_x0",
    "violated",
    "paper_region",
    "refined_region",
];

fn region(a: RegionArgs) -> Result<u8, Failure> {
    let beta1s = config::parse_grid(&a.beta1_grid).map_err(Failure::Usage)?;
    let c0s = config::parse_grid(&a.c0_grid).map_err(Failure::Usage)?;
    // the displayed regions describe a single replicate with no L1 cost
    let d = a.noise.bernoulli_d().filter(|_| a.c1 == 0.0 && a.n == 1);
    let mut rows = Vec::with_capacity(beta1s.len() * c0s.len());
    for &beta1 in &beta1s {
        let model = ModelParams::new(0.0, beta1)?;
        for &c0 in &c0s {
            let report = ic_at_beta(&model, &a.noise, &PenaltyParams::new(c0, a.c1)?, a.n)?;
            rows.push(vec![
                beta1.into(),
                c0.into(),
                report.deviation(true).margin.into(),
                report.deviation(false).margin.into(),
                (!report.ic).into(),
                d.map(|d| bernoulli_paper_region(beta1, c0, d)).into(),
                d.map(|d| bernoulli_refined_region(beta1, c0, d)).into(),
            ]);
        }
    }
    emit(&a.out, &REGION_COLUMNS, &rows)?;
    Ok(0)
}

fn suite(a: SuiteArgs) -> Result<u8, Failure> {
    let beta1s = config::parse_grid(&a.beta1_grid).map_err(Failure::Usage)?;
    let c0s = config::parse_grid(&a.c0_grid).map_err(Failure::Usage)?;
    let c1s = config::parse_grid(&a.c1_grid).map_err(Failure::Usage)?;
    let mut penalties = Vec::with_capacity(c0s.len() * c1s.len());
    for &c0 in &c0s {
        for &c1 in &c1s {
            penalties.push(PenaltyParams::new(c0, c1)?);
        }
    }
    let report = symmetric_suite(&a.noise, &beta1s, &penalties)?;
    for s in &report.per_noise {
        let worst = s.worst.as_ref().map_or("-".to_string(), |w| {
            format!(
                "{} at beta1={} c0={} c1={} x={}",
                fmt_sig(w.margin),
                fmt_sig(w.beta1),
                fmt_sig(w.c0),
                fmt_sig(w.c1),
                u8::from(w.x)
            )
        });
        println!(
            "{} backend={:?} points={} violations={} min_margin={}",
            s.noise, s.backend, s.points, s.violations, worst
        );
    }
    Ok(if report.total_violations() == 0 { 0 } else { VIOLATION })
}

pub const ASYMPTOTICS_COLUMNS: [&str; 6] = ["n", "pivot_prob", "cond_eps0", "cond_eps1", "ic_statistic", "loss_gap"];

fn asymptotics(a: AsymptoticsArgs) -> Result<u8, Failure> {
    if !(a.p > 0.0 && a.p < 1.0) {
        return Err(Failure::Domain(format!("requires p in (0, 1), got {}", a.p)));
    }
    let d = a.p / (1.0 - a.p);
    let ns = config::parse_n_list(&a.n_list).map_err(Failure::Usage)?;
    // validate the limit first so a bad theta_h is reported before any enumeration
    let (e0, e1) = limit_conditional_means(a.beta1, a.c0, d)?;
    let stat = limit_ic_statistic(a.beta1, a.c0, d)?;
    let mut rows: Vec<Vec<Cell>> = finite_n_probe(a.beta1, a.c0, d, &ns)?
        .into_iter()
        .map(|r| {
            vec![
                Cell::Int(r.n.into()),
                r.pivot_prob.into(),
                r.cond_eps0.into(),
                r.cond_eps1.into(),
                r.ic_statistic.into(),
                r.loss_gap.into(),
            ]
        })
        .collect();
    rows.push(vec![
        Cell::Text("limit".into()),
        Cell::Empty,
        e0.into(),
        e1.into(),
        stat.into(),
        Cell::Empty,
    ]);
    emit(&a.out, &ASYMPTOTICS_COLUMNS, &rows)?;
    Ok(0)
}
