//! `lbp`: solve, tune, certify and benchmark linear bilevel problems.
//!
//! Exit codes: 0 optimal (or certified global), 1 solver failure, 2
//! infeasible, 3 unbounded, 4 certified suboptimal, 64 usage error, 65 bad
//! instance file.

mod input;
mod report;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lbp_core::genlab::{self, BenchPolicy, FeasibilityMode, GenConfig};
use lbp_core::milp::{enumerate_patterns, solve_milp_bnb, MilpSolution, MilpStatus};
use lbp_core::model::{catalog, BilevelSolution, LbpInstance, SolutionStatus};
use lbp_core::oracle::{certify_candidate, solve_global_oracle, verify_bilevel_feasible};
use lbp_core::reform::{bigm_reformulate, kkt_reformulate, write_lp_format, BigMConfig};
use lbp_core::tuner::{
    estimate_bigm_local, tune_trial_and_error, TuneOutcome, DEFAULT_GROWTH, DEFAULT_MAX_ITER,
};
use lbp_core::{Error, Settings};
use log::info;

use input::{load_instance, parse_point, parse_vector};
use report::{join, RunReport, Timing};

const EXIT_FAILURE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_UNBOUNDED: u8 = 3;
const EXIT_SUBOPTIMAL: u8 = 4;
const EXIT_USAGE: u8 = 64;
const EXIT_BAD_FILE: u8 = 65;

/// Default big-M constant for `solve`, `tune` and `export-lp`.
const DEFAULT_BIGM: &str = "200";

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn bad_file(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_BAD_FILE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::InvalidParameter(_) | Error::InvalidBigM(_) | Error::Dimension(_) => EXIT_USAGE,
            Error::InvalidInstance(_) | Error::Json(_) => EXIT_BAD_FILE,
            _ => EXIT_FAILURE,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        Self {
            code: EXIT_FAILURE,
            message: err.to_string(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "lbp",
    version,
    about = "Linear bilevel problems via KKT and big-M reformulations"
)]
struct Cli {
    /// More log output on stderr (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve an instance with the big-M MILP, the exact oracle, or full pattern enumeration.
    Solve(SolveArgs),
    /// Run the trial-and-error big-M loop.
    Tune(TuneArgs),
    /// Estimate big-M constants from a locally optimal KKT point.
    Estimate(EstimateArgs),
    /// Check that a point is bilevel feasible.
    Verify(VerifyArgs),
    /// Write the big-M MILP in LP text format.
    ExportLp(ExportArgs),
    /// Generate random instances.
    Generate(GenerateArgs),
    /// Measure how often the trial-and-error loop accepts a suboptimal point.
    Bench(BenchArgs),
    /// List catalog instances, or print one as JSON.
    Catalog { name: Option<String> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Bigm,
    Oracle,
    Enumerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct Output {
    /// Report format on stdout.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Also write the JSON report to this file.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Instance JSON file, or `@name` for a catalog instance.
    instance: String,
    #[arg(long, value_enum, default_value = "bigm")]
    method: Method,
    /// Primal big-M constants: one value or one per lower row.
    #[arg(long, default_value = DEFAULT_BIGM)]
    mp: String,
    /// Dual big-M constants: one value or one per lower row.
    #[arg(long, default_value = DEFAULT_BIGM)]
    md: String,
    /// Verify the MILP point and compare it with the exact optimum (bigm only).
    #[arg(long)]
    certify: bool,
    /// Write the pattern table as CSV (enumerate only).
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct TuneArgs {
    instance: String,
    #[arg(long, default_value = DEFAULT_BIGM)]
    mp0: String,
    #[arg(long, default_value = DEFAULT_BIGM)]
    md0: String,
    #[arg(long, default_value_t = DEFAULT_GROWTH)]
    growth: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// Compare the accepted point with the exact optimum.
    #[arg(long)]
    certify: bool,
    /// Write the iteration trace as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    instance: String,
    /// Safety factor applied to the observed slacks and multipliers.
    #[arg(long, default_value_t = 10.0)]
    kappa: f64,
    /// Also solve the MILP with the estimated constants and certify it.
    #[arg(long)]
    solve: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    instance: String,
    /// Leader point, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    x: String,
    /// Follower point, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    y: String,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args, Debug)]
struct ExportArgs {
    instance: String,
    #[arg(long, default_value = DEFAULT_BIGM)]
    mp: String,
    #[arg(long, default_value = DEFAULT_BIGM)]
    md: String,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Anchor,
    Origin,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Random upper rows, on top of the 2n box rows.
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 4)]
    j: usize,
    #[arg(long, default_value_t = 1.0)]
    coef_range: f64,
    /// Lower rows are scaled by factors spread over 10^-sigma ..= 10^sigma.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 10.0)]
    x_box: f64,
    #[arg(long, value_enum, default_value = "anchor")]
    mode: Mode,
    #[arg(long, default_value_t = 20)]
    retries: usize,
}

impl GenArgs {
    fn config(&self) -> GenConfig {
        GenConfig {
            seed: self.seed,
            n: self.n,
            m: self.m,
            k: self.k,
            j: self.j,
            coef_range: self.coef_range,
            sigma: self.sigma,
            x_box: self.x_box,
            feasibility: match self.mode {
                Mode::Anchor => FeasibilityMode::Anchor,
                Mode::Origin => FeasibilityMode::Origin,
            },
            retries: self.retries,
        }
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    gen: GenArgs,
    /// Number of instances; more than one needs `--out` as a directory.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Output file (or directory with `--count`); stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Instance files to benchmark instead of generated ones.
    instances: Vec<String>,
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 100.0)]
    mp0: f64,
    #[arg(long, default_value_t = 100.0)]
    md0: f64,
    #[arg(long, default_value_t = DEFAULT_GROWTH)]
    growth: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, default_value_t = 10.0)]
    kappa: f64,
    /// Write one CSV row per instance.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let _ = err.print();
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("RUST_LOG")
        .init();

    let settings = Settings::from_env();
    match run(cli.command, &settings) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("lbp: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

fn run(command: Command, settings: &Settings) -> Result<u8, CliError> {
    match command {
        Command::Solve(args) => cmd_solve(args, settings),
        Command::Tune(args) => cmd_tune(args, settings),
        Command::Estimate(args) => cmd_estimate(args, settings),
        Command::Verify(args) => cmd_verify(args, settings),
        Command::ExportLp(args) => cmd_export_lp(args),
        Command::Generate(args) => cmd_generate(args),
        Command::Bench(args) => cmd_bench(args, settings),
        Command::Catalog { name } => cmd_catalog(name),
    }
}

fn bigm_flags(mp: &str, md: &str, j: usize) -> Result<BigMConfig, CliError> {
    let cfg = BigMConfig::new(parse_vector("mp", mp, j)?, parse_vector("md", md, j)?)?;
    Ok(cfg)
}

fn milp_exit(status: MilpStatus) -> u8 {
    match status {
        MilpStatus::Optimal => 0,
        MilpStatus::Infeasible => EXIT_INFEASIBLE,
        MilpStatus::Unbounded => EXIT_UNBOUNDED,
    }
}

fn milp_point(inst: &LbpInstance, sol: &MilpSolution) -> BilevelSolution {
    match sol.status {
        MilpStatus::Optimal => BilevelSolution::at(
            inst,
            sol.x.clone(),
            sol.y.clone(),
            sol.lambda.clone(),
            SolutionStatus::AcceptedUnverified,
        ),
        MilpStatus::Infeasible => BilevelSolution::without_point(SolutionStatus::Infeasible),
        MilpStatus::Unbounded => BilevelSolution::without_point(SolutionStatus::Unbounded),
    }
}

fn emit(
    report: &RunReport,
    output: &Output,
    csv: Option<String>,
    settings: &Settings,
) -> Result<(), CliError> {
    if let Some(path) = &output.report {
        fs::write(path, report.to_json())?;
    }
    let mut stdout = std::io::stdout().lock();
    match output.format {
        Format::Text => stdout.write_all(report.to_text(settings.multiple_width).as_bytes())?,
        Format::Json => stdout.write_all(report.to_json().as_bytes())?,
        Format::Csv => match csv {
            Some(text) => stdout.write_all(text.as_bytes())?,
            None => return Err(CliError::usage("--format csv needs a tabular result")),
        },
    }
    Ok(())
}

fn cmd_solve(args: SolveArgs, settings: &Settings) -> Result<u8, CliError> {
    if args.certify && args.method != Method::Bigm {
        return Err(CliError::usage("--certify applies to --method bigm only"));
    }
    if args.csv.is_some() && args.method != Method::Enumerate {
        return Err(CliError::usage("--csv applies to --method enumerate only"));
    }
    if args.output.format == Format::Csv && args.method != Method::Enumerate {
        return Err(CliError::usage(
            "--format csv applies to --method enumerate only",
        ));
    }
    let (inst, info) = load_instance(&args.instance, false)?;
    let start = Instant::now();
    let method = format!("{:?}", args.method).to_lowercase();
    let mut report = RunReport::new(info, &method);

    match args.method {
        Method::Oracle => {
            let oracle = solve_global_oracle(&inst, settings)?;
            report.exit_code = match oracle.solution.status {
                SolutionStatus::Infeasible => EXIT_INFEASIBLE,
                SolutionStatus::Unbounded => EXIT_UNBOUNDED,
                _ => 0,
            };
            report.solution = Some(oracle.solution.clone());
            report.oracle = Some(oracle);
        }
        Method::Bigm | Method::Enumerate => {
            let cfg = bigm_flags(&args.mp, &args.md, inst.j())?;
            let milp = bigm_reformulate(&kkt_reformulate(&inst)?, &cfg)?;
            let mut sol = if args.method == Method::Bigm {
                solve_milp_bnb(&milp, settings)?
            } else {
                enumerate_patterns(&milp, settings)?
            };
            info!("{} nodes, status {:?}", sol.nodes, sol.status);
            report.exit_code = milp_exit(sol.status);
            let mut point = milp_point(&inst, &sol);
            if args.certify && sol.is_optimal() {
                let cert = certify_candidate(&inst, &point, settings)?;
                if cert.certificate.is_global() {
                    point.status = SolutionStatus::Optimal;
                } else {
                    report.exit_code = EXIT_SUBOPTIMAL;
                }
                report.certification = Some(cert);
            }
            report.table = sol.table.take();
            report.solution = Some(point);
            report.milp = Some(sol);
            report.config = Some(cfg);
        }
    }
    report.timing = Timing {
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };

    let csv = match &report.table {
        Some(table) => Some(table.to_csv_string(settings.multiple_width)?),
        None => None,
    };
    if let (Some(path), Some(text)) = (&args.csv, &csv) {
        fs::write(path, text)?;
    }
    emit(&report, &args.output, csv, settings)?;
    Ok(report.exit_code)
}

fn cmd_tune(args: TuneArgs, settings: &Settings) -> Result<u8, CliError> {
    if args.max_iter == 0 {
        return Err(CliError::usage("--max-iter must be at least 1"));
    }
    if !(args.growth.is_finite() && args.growth > 1.0) {
        return Err(CliError::usage("--growth must be greater than 1"));
    }
    let (inst, info) = load_instance(&args.instance, false)?;
    let cfg0 = bigm_flags(&args.mp0, &args.md0, inst.j())?;
    let start = Instant::now();
    let tune = tune_trial_and_error(
        &inst,
        &cfg0,
        args.growth,
        args.max_iter,
        args.certify,
        settings,
    )?;

    let mut report = RunReport::new(info, "tune");
    report.exit_code = match tune.outcome {
        TuneOutcome::Accepted => match tune.certification.as_ref().map(|c| &c.certificate) {
            Some(cert) if cert.is_failure() => EXIT_SUBOPTIMAL,
            _ => 0,
        },
        TuneOutcome::MilpInfeasible => EXIT_INFEASIBLE,
        TuneOutcome::MilpUnbounded => EXIT_UNBOUNDED,
        TuneOutcome::IterationLimit => EXIT_FAILURE,
    };
    if tune.outcome == TuneOutcome::IterationLimit {
        eprintln!("lbp: no acceptance within {} iterations", args.max_iter);
    }
    report.config = tune.final_config().cloned();
    report.solution = tune.solution.clone();
    report.certification = tune.certification.clone();
    let csv = tune.trace_csv_string()?;
    report.tune = Some(tune);
    report.timing = Timing {
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    if let Some(path) = &args.csv {
        fs::write(path, &csv)?;
    }
    emit(&report, &args.output, Some(csv), settings)?;
    Ok(report.exit_code)
}

fn cmd_estimate(args: EstimateArgs, settings: &Settings) -> Result<u8, CliError> {
    if args.format == Format::Csv {
        return Err(CliError::usage("estimate has no CSV output"));
    }
    let (inst, _) = load_instance(&args.instance, false)?;
    let est = estimate_bigm_local(&inst, args.kappa, settings)?;
    let verdict = if args.solve {
        let oracle = solve_global_oracle(&inst, settings)?;
        Some(genlab::milp_with_config(
            &inst,
            &est.config,
            &oracle,
            settings,
        )?)
    } else {
        None
    };
    let code = match &verdict {
        Some((_, cert)) if cert.is_failure() => EXIT_SUBOPTIMAL,
        _ => 0,
    };
    if args.format == Format::Json {
        let value = serde_json::json!({
            "estimate": est,
            "milp_z": verdict.as_ref().map(|v| v.0),
            "certificate": verdict.as_ref().map(|v| &v.1),
        });
        println!(
            "{}",
            serde_json::to_string_pretty(&value).expect("estimate serializes")
        );
    } else {
        let bits = |u: &[bool]| {
            u.iter()
                .map(|&b| u8::from(b).to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        println!("start u      {}", bits(&est.start_pattern));
        println!("local u      {}", bits(est.pattern()));
        println!(
            "local z      {}",
            lbp_core::fmt::fmt_num(est.solution.z_upper)
        );
        println!("LP solves    {}", est.lp_solves);
        println!("MP           {}", join(&est.config.mp));
        println!("MD           {}", join(&est.config.md));
        if let Some((z, cert)) = &verdict {
            println!("MILP z       {}", lbp_core::fmt::fmt_num(*z));
            println!("certificate  {cert}");
        }
    }
    Ok(code)
}

fn cmd_verify(args: VerifyArgs, settings: &Settings) -> Result<u8, CliError> {
    if args.format == Format::Csv {
        return Err(CliError::usage("verify has no CSV output"));
    }
    let (inst, _) = load_instance(&args.instance, true)?;
    let x = parse_point("x", &args.x, inst.n)?;
    let y = parse_point("y", &args.y, inst.m)?;
    let rep = verify_bilevel_feasible(&inst, &x, &y, args.tol, settings)?;
    if args.format == Format::Json {
        println!(
            "{}",
            serde_json::to_string_pretty(&rep).expect("report serializes")
        );
    } else {
        use lbp_core::fmt::fmt_num;
        println!("feasible         {}", rep.feasible);
        if let Some(reason) = &rep.reason {
            println!("reason           {reason}");
        }
        println!("upper violation  {}", fmt_num(rep.upper_violation));
        println!("lower violation  {}", fmt_num(rep.lower_violation));
        println!("follower status  {:?}", rep.follower_status);
        if !rep.follower_y.is_empty() {
            println!("follower y       {}", join(&rep.follower_y));
            println!("follower z       {}", fmt_num(rep.follower_z));
            println!("lower gap        {}", fmt_num(rep.lower_gap));
        }
    }
    Ok(if rep.feasible { 0 } else { EXIT_INFEASIBLE })
}

fn cmd_export_lp(args: ExportArgs) -> Result<u8, CliError> {
    let (inst, _) = load_instance(&args.instance, false)?;
    let cfg = bigm_flags(&args.mp, &args.md, inst.j())?;
    let text = write_lp_format(&bigm_reformulate(&kkt_reformulate(&inst)?, &cfg)?);
    match &args.out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(0)
}

fn cmd_generate(args: GenerateArgs) -> Result<u8, CliError> {
    let cfg = args.gen.config();
    match (args.count, &args.out) {
        (0, _) => Err(CliError::usage("--count must be at least 1")),
        (1, None) => {
            print!("{}", genlab::generate_random(&cfg)?.to_json_string()?);
            Ok(0)
        }
        (1, Some(path)) if !path.is_dir() => {
            genlab::generate_random(&cfg)?.write_json(path)?;
            Ok(0)
        }
        (_, None) => Err(CliError::usage("--count above 1 needs --out DIR")),
        (count, Some(dir)) => {
            fs::create_dir_all(dir)?;
            for path in genlab::write_instances(dir, &cfg, count)? {
                println!("{}", path.display());
            }
            Ok(0)
        }
    }
}

fn cmd_bench(args: BenchArgs, settings: &Settings) -> Result<u8, CliError> {
    if args.max_iter == 0 {
        return Err(CliError::usage("--max-iter must be at least 1"));
    }
    let policy = BenchPolicy {
        mp0: args.mp0,
        md0: args.md0,
        growth: args.growth,
        max_iter: args.max_iter,
        kappa: args.kappa,
    };
    let result = if args.instances.is_empty() {
        genlab::run_benchmark(&args.gen.config(), args.count, &policy, settings)?
    } else {
        let instances = args
            .instances
            .iter()
            .map(|p| load_instance(p, false).map(|(inst, _)| inst))
            .collect::<Result<Vec<_>, _>>()?;
        genlab::run_benchmark_on(&instances, &policy, settings)
    };
    if let Some(path) = &args.csv {
        fs::write(path, result.to_csv_string()?)?;
    }
    match args.format {
        Format::Text => print!("{}", result.summary_text()),
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&result).expect("result serializes")
        ),
        Format::Csv => print!("{}", result.to_csv_string()?),
    }
    Ok(0)
}

fn cmd_catalog(name: Option<String>) -> Result<u8, CliError> {
    match name {
        None => {
            println!("counterexample");
            println!("counterexample-eps-<eps>");
            println!("decoupled");
        }
        Some(name) => {
            let inst = catalog::by_name(&name)
                .ok_or_else(|| CliError::usage(format!("unknown catalog instance `{name}`")))?;
            print!("{}", inst.to_json_string()?);
        }
    }
    Ok(0)
}
