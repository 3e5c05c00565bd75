//! Argument handling and execution for the `evotransit` binary.

use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use evotransit::engine::DEFAULT_MAX_GENERATIONS;
use evotransit::imaging::{self, PngDirSink};
use evotransit::mutation::{DEFAULT_C_S, DEFAULT_C_T, DEFAULT_H_STRIP, DEFAULT_V_STRIP};
use evotransit::onemax::{self, LabOperator, Sampling};
use evotransit::{
    AsymmetricParams, Error, GeometricOp, GeometryOptions, Interleave, MilestoneEvent, NullSink, OperatorSpec,
    RunConfig, RunReport, Termination,
};
use serde::Serialize;
use thiserror::Error;

pub const THREADS_ENV: &str = "EVOTRANSIT_THREADS";
pub const DEFAULT_GIF_DELAY_MS: u32 = 100;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_DIMENSIONS: i32 = 3;

pub const OPERATOR_NAMES: [&str; 8] = [
    "standard",
    "asymmetric",
    "strip",
    "combined-strip",
    "box",
    "asym+strip",
    "asym+combined-strip",
    "asym+box",
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Engine(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Engine(Error::InvalidParameter(_)) => EXIT_USAGE,
            CliError::Engine(Error::DimensionMismatch { .. }) => EXIT_DIMENSIONS,
            CliError::Engine(_) => EXIT_IO,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "evotransit", version, about = "Evolutionary image transition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve a start image toward a target image.
    Transition(TransitionArgs),
    /// Runtime scaling of the (1+1) EA on OneMax bitstrings.
    Onemax(OnemaxArgs),
}

#[derive(Debug, Args)]
struct TransitionArgs {
    #[arg(long)]
    start: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// standard, asymmetric, strip, combined-strip, box, asym+strip, asym+combined-strip or asym+box
    #[arg(long, default_value = "asymmetric")]
    operator: String,
    #[arg(long = "cs", default_value_t = DEFAULT_C_S)]
    c_s: f64,
    #[arg(long = "ct", default_value_t = DEFAULT_C_T)]
    c_t: f64,
    #[arg(long, default_value_t = 180)]
    strip_length: usize,
    #[arg(long, default_value_t = 3)]
    box_size: usize,
    /// Asymmetric steps : partner steps, for asym+* operators.
    #[arg(long, default_value = "1:1")]
    interleave: String,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Seed range `A..B` (exclusive) or `A..=B` (inclusive); one run per seed.
    #[arg(long)]
    seeds: Option<String>,
    /// Comma-separated fractions in (0, 1).
    #[arg(long, default_value = "0.125,0.375,0.625,0.875")]
    milestones: String,
    #[arg(long, default_value_t = DEFAULT_MAX_GENERATIONS)]
    max_gens: u64,
    #[arg(long)]
    frame_every: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Assemble the frames into a GIF, optionally with a frame delay in ms.
    #[arg(long, num_args = 0..=1, default_missing_value = "100", value_name = "DELAY_MS")]
    gif: Option<u32>,
    /// Toggle covered pixels instead of setting them to the target.
    #[arg(long)]
    toggle_geometric: bool,
    /// Keep strips and boxes fully inside the image instead of clipping.
    #[arg(long)]
    fit_anchors: bool,
}

#[derive(Debug, Args)]
struct OnemaxArgs {
    /// standard or asymmetric
    #[arg(long, default_value = "asymmetric")]
    operator: String,
    #[arg(long, default_value = "1024,2048,4096,8192")]
    n_list: String,
    #[arg(long, default_value_t = 50)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long = "cs", default_value_t = 1.0)]
    c_s: f64,
    #[arg(long = "ct", default_value_t = 1.0)]
    c_t: f64,
    /// per-bit (one draw per bit) or skip (geometric gaps between flips)
    #[arg(long, default_value = "skip")]
    sampling: String,
}

/// Every transition flag as given, echoed into `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub start: PathBuf,
    pub target: PathBuf,
    pub operator: String,
    pub cs: f64,
    pub ct: f64,
    pub strip_length: usize,
    pub box_size: usize,
    pub interleave: String,
    pub seed: u64,
    pub seeds: Option<String>,
    pub milestones: Vec<f64>,
    pub max_gens: u64,
    pub frame_every: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub gif: Option<u32>,
    pub toggle_geometric: bool,
    pub fit_anchors: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionPlan {
    pub echo: ConfigEcho,
    /// Config for the first seed; batch runs replace the seed.
    pub config: RunConfig,
    pub seeds: Range<u64>,
    pub batch: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnemaxPlan {
    pub operator: LabOperator,
    pub n_list: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub csv: Option<PathBuf>,
    pub sampling: Sampling,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Invocation {
    Transition(Box<TransitionPlan>),
    Onemax(OnemaxPlan),
}

/// Outcome of argument parsing that is not an invocation.
#[derive(Debug)]
pub enum ParseOutcome {
    Run(Invocation),
    /// `--help` or `--version` text, printed with exit code 0.
    Info(String),
}

pub fn parse_and_validate<I, T>(argv: I) -> Result<ParseOutcome, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Ok(ParseOutcome::Info(e.to_string())),
                _ => Err(usage(e.to_string())),
            };
        }
    };
    let invocation = match cli.command {
        Command::Transition(args) => Invocation::Transition(Box::new(resolve_transition(args)?)),
        Command::Onemax(args) => Invocation::Onemax(resolve_onemax(args)?),
    };
    Ok(ParseOutcome::Run(invocation))
}

fn resolve_transition(args: TransitionArgs) -> Result<TransitionPlan, CliError> {
    let asym = AsymmetricParams::new(args.c_s, args.c_t);
    asym.validate().map_err(|e| usage(e.to_string()))?;
    let interleave = parse_interleave(&args.interleave)?;
    let strip = GeometricOp::Strip {
        length: args.strip_length,
    };
    let combined = GeometricOp::CombinedStrip {
        horizontal: DEFAULT_H_STRIP,
        vertical: DEFAULT_V_STRIP,
    };
    let boxed = GeometricOp::Box { size: args.box_size };
    let composite = |partner| OperatorSpec::Composite {
        asymmetric: asym,
        partner,
        ratio: interleave,
    };
    let operator = match args.operator.as_str() {
        "standard" => OperatorSpec::Standard,
        "asymmetric" => OperatorSpec::Asymmetric(asym),
        "strip" => strip.into(),
        "combined-strip" => combined.into(),
        "box" => boxed.into(),
        "asym+strip" => composite(strip),
        "asym+combined-strip" => composite(combined),
        "asym+box" => composite(boxed),
        other => {
            return Err(usage(format!(
                "unknown operator '{other}'; expected one of {}",
                OPERATOR_NAMES.join(", ")
            )))
        }
    };
    // strip/box sizes are validated even when the operator does not use them
    for op in [strip, boxed] {
        op.validate().map_err(|e| usage(e.to_string()))?;
    }

    let (seeds, batch) = match (&args.seeds, args.seed) {
        (Some(range), _) => (parse_seed_range(range)?, true),
        (None, seed) => {
            let s = seed.unwrap_or(0);
            (s..s + 1, false)
        }
    };
    let milestones = parse_fractions(&args.milestones)?;
    if args.gif.is_some() && args.out_dir.is_none() {
        return Err(usage("--gif requires --out-dir"));
    }

    let config = RunConfig {
        operator,
        geometry: GeometryOptions {
            toggle: args.toggle_geometric,
            fit_anchors: args.fit_anchors,
        },
        seed: seeds.start,
        milestones: milestones.clone(),
        max_generations: args.max_gens,
        frame_every: args.frame_every,
        emit_initial_final: true,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;

    let echo = ConfigEcho {
        start: args.start,
        target: args.target,
        operator: args.operator,
        cs: args.c_s,
        ct: args.c_t,
        strip_length: args.strip_length,
        box_size: args.box_size,
        interleave: format!("{}:{}", interleave.asymmetric, interleave.partner),
        seed: seeds.start,
        seeds: args.seeds,
        milestones,
        max_gens: args.max_gens,
        frame_every: args.frame_every,
        out_dir: args.out_dir,
        gif: args.gif,
        toggle_geometric: args.toggle_geometric,
        fit_anchors: args.fit_anchors,
    };
    Ok(TransitionPlan {
        echo,
        config,
        seeds,
        batch,
    })
}

fn resolve_onemax(args: OnemaxArgs) -> Result<OnemaxPlan, CliError> {
    let operator = match args.operator.as_str() {
        "standard" => LabOperator::Standard,
        "asymmetric" => {
            AsymmetricParams::new(args.c_s, args.c_t)
                .validate()
                .map_err(|e| usage(e.to_string()))?;
            LabOperator::Asymmetric {
                c_s: args.c_s,
                c_t: args.c_t,
            }
        }
        other => return Err(usage(format!("unknown onemax operator '{other}'"))),
    };
    let sampling = match args.sampling.as_str() {
        "per-bit" => Sampling::PerBit,
        "skip" => Sampling::Skip,
        other => return Err(usage(format!("unknown sampling mode '{other}'"))),
    };
    let n_list = args
        .n_list
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|_| usage(format!("bad n value '{s}'"))))
        .collect::<Result<Vec<_>, _>>()?;
    if n_list.is_empty() || n_list[0] == 0 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(usage("--n-list must be positive and strictly increasing"));
    }
    if args.repeats < onemax::MIN_REPEATS {
        return Err(usage(format!("--repeats must be at least {}", onemax::MIN_REPEATS)));
    }
    Ok(OnemaxPlan {
        operator,
        n_list,
        repeats: args.repeats,
        seed: args.seed,
        csv: args.csv,
        sampling,
    })
}

fn parse_interleave(s: &str) -> Result<Interleave, CliError> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| usage(format!("--interleave expects A:B, got '{s}'")))?;
    let a = a.trim().parse().map_err(|_| usage(format!("bad interleave '{s}'")))?;
    let b = b.trim().parse().map_err(|_| usage(format!("bad interleave '{s}'")))?;
    Interleave::new(a, b).map_err(|e| usage(e.to_string()))
}

fn parse_seed_range(s: &str) -> Result<Range<u64>, CliError> {
    let bad = || usage(format!("--seeds expects A..B or A..=B, got '{s}'"));
    let (a, rest) = s.split_once("..").ok_or_else(bad)?;
    let start: u64 = a.trim().parse().map_err(|_| bad())?;
    let end = match rest.strip_prefix('=') {
        Some(b) => b.trim().parse::<u64>().map_err(|_| bad())?.checked_add(1).ok_or_else(bad)?,
        None => rest.trim().parse::<u64>().map_err(|_| bad())?,
    };
    if end <= start {
        return Err(usage(format!("--seeds range '{s}' is empty")));
    }
    Ok(start..end)
}

fn parse_fractions(s: &str) -> Result<Vec<f64>, CliError> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| usage(format!("bad milestone '{x}'"))))
        .collect()
}

#[derive(Debug, Serialize)]
pub struct ReportDocument<'a> {
    pub config: &'a ConfigEcho,
    pub generations: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub final_fraction: f64,
    pub milestones: &'a [MilestoneEvent],
    pub termination: Termination,
    pub trajectory: &'a [(u64, usize)],
    pub reproduce: String,
}

/// Shell command line that repeats the run with `seed` writing to `out_dir`.
pub fn reproduce_command(echo: &ConfigEcho, seed: u64, out_dir: Option<&Path>) -> String {
    let mut cmd = String::from("evotransit transition");
    let mut flag = |name: &str, value: &str| {
        let _ = write!(cmd, " --{name} {}", shell_quote(value));
    };
    flag("start", &echo.start.to_string_lossy());
    flag("target", &echo.target.to_string_lossy());
    flag("operator", &echo.operator);
    flag("cs", &echo.cs.to_string());
    flag("ct", &echo.ct.to_string());
    flag("strip-length", &echo.strip_length.to_string());
    flag("box-size", &echo.box_size.to_string());
    flag("interleave", &echo.interleave);
    flag("seed", &seed.to_string());
    let milestones: Vec<String> = echo.milestones.iter().map(f64::to_string).collect();
    flag("milestones", &milestones.join(","));
    flag("max-gens", &echo.max_gens.to_string());
    if let Some(n) = echo.frame_every {
        flag("frame-every", &n.to_string());
    }
    if let Some(dir) = out_dir {
        flag("out-dir", &dir.to_string_lossy());
    }
    if let Some(ms) = echo.gif {
        flag("gif", &ms.to_string());
    }
    if echo.toggle_geometric {
        cmd.push_str(" --toggle-geometric");
    }
    if echo.fit_anchors {
        cmd.push_str(" --fit-anchors");
    }
    cmd
}

fn shell_quote(s: &str) -> String {
    if !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || "-_./:,+=@".contains(c))
    {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', r"'\''"))
    }
}

/// Rayon pool honouring `EVOTRANSIT_THREADS`.
fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let n: usize = value
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| usage(format!("{THREADS_ENV} must be a positive integer, got '{value}'")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| usage(e.to_string()))
}

pub fn execute(invocation: &Invocation) -> Result<(), CliError> {
    match invocation {
        Invocation::Transition(plan) => execute_transition(plan),
        Invocation::Onemax(plan) => execute_onemax(plan),
    }
}

fn execute_transition(plan: &TransitionPlan) -> Result<(), CliError> {
    let start = imaging::load_raster(&plan.echo.start)?;
    let target = imaging::load_raster(&plan.echo.target)?;
    if !start.same_dims(&target) {
        return Err(Error::DimensionMismatch {
            left_width: start.width(),
            left_height: start.height(),
            right_width: target.width(),
            right_height: target.height(),
        }
        .into());
    }

    if !plan.batch {
        let line = run_one(plan, &start, &target, plan.seeds.start, plan.echo.out_dir.clone(), Path::new("."))?;
        println!("{line}");
        return Ok(());
    }

    let base = plan.echo.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let seeds: Vec<u64> = plan.seeds.clone().collect();
    let pool = thread_pool()?;
    let lines: Vec<Result<String, CliError>> = pool.install(|| {
        use rayon::prelude::*;
        seeds
            .par_iter()
            .map(|&seed| {
                let dir = base.join(format!("seed_{seed}"));
                let frames = plan.echo.out_dir.as_ref().map(|_| dir.clone());
                run_one(plan, &start, &target, seed, frames, &dir)
            })
            .collect()
    });
    for line in lines {
        println!("{}", line?);
    }
    Ok(())
}

/// One seeded run; frames go to `frame_dir` when set, `report.json` to
/// `frame_dir` or else `report_dir`.
fn run_one(
    plan: &TransitionPlan,
    start: &evotransit::Raster,
    target: &evotransit::Raster,
    seed: u64,
    frame_dir: Option<PathBuf>,
    report_dir: &Path,
) -> Result<String, CliError> {
    let config = RunConfig {
        seed,
        ..plan.config.clone()
    };
    let report_dir = frame_dir.as_deref().unwrap_or(report_dir).to_path_buf();
    fs::create_dir_all(&report_dir).map_err(|e| Error::Io {
        path: report_dir.clone(),
        message: e.to_string(),
    })?;

    let report: RunReport = match &frame_dir {
        Some(dir) => {
            let mut sink = PngDirSink::new(dir)?;
            let report = evotransit::run(start, target, &config, &mut sink)?;
            if let Some(delay) = plan.echo.gif {
                imaging::assemble_animation(sink.records(), dir.join("transition.gif"), delay)?;
            }
            report
        }
        None => evotransit::run(start, target, &config, NullSink)?,
    };

    let mut echo = plan.echo.clone();
    echo.seed = seed;
    let reproduce = reproduce_command(&echo, seed, frame_dir.as_deref());
    let doc = ReportDocument {
        config: &echo,
        generations: report.generations_run,
        accepted: report.accepted,
        rejected: report.rejected,
        final_fraction: report.final_fraction,
        milestones: &report.milestone_events,
        termination: report.termination,
        trajectory: &report.fitness_trajectory,
        reproduce: reproduce.clone(),
    };
    let report_path = report_dir.join("report.json");
    let mut json = serde_json::to_string_pretty(&doc).expect("report serializes");
    json.push('\n');
    fs::write(&report_path, json).map_err(|e| Error::Io {
        path: report_path.clone(),
        message: e.to_string(),
    })?;

    Ok(format!(
        "{} seed {seed}: {:?} after {} generations ({} accepted, {} rejected), {:.1}% target; report {}\nreproduce: {reproduce}",
        plan.echo.operator,
        report.termination,
        report.generations_run,
        report.accepted,
        report.rejected,
        report.final_fraction * 100.0,
        report_path.display(),
    ))
}

fn execute_onemax(plan: &OnemaxPlan) -> Result<(), CliError> {
    let pool = thread_pool()?;
    let result = pool.install(|| {
        onemax::scaling_experiment(plan.operator, &plan.n_list, plan.repeats, plan.seed, plan.sampling)
    })?;
    if let Some(path) = &plan.csv {
        let file = fs::File::create(path).map_err(|e| Error::Io {
            path: path.clone(),
            message: e.to_string(),
        })?;
        result
            .write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Error::Io {
                path: path.clone(),
                message: e.to_string(),
            })?;
    }
    println!("operator {} ({} repeats, seed {})", plan.operator.name(), plan.repeats, plan.seed);
    for p in &result.points {
        println!(
            "n = {:>8}  trimmed mean {:>14.1}  mean {:>14.1}  sd {:>12.1}",
            p.n, p.trimmed_mean, p.mean, p.std_dev
        );
    }
    if result.ratios.is_empty() {
        println!("doubling ratios: insufficient points");
    } else {
        let ratios: Vec<String> = result.ratios.iter().map(|r| format!("{r:.3}")).collect();
        println!("ratios T(n[i+1])/T(n[i]): {}", ratios.join(", "));
    }
    match (&result.fits, result.better_model()) {
        (Some((lin, nln)), Some(better)) => println!(
            "fit c*n: c = {:.4}, rss {:.3e}; fit c*n*ln n: c = {:.4}, rss {:.3e}; better: {better:?}",
            lin.coefficient, lin.rss, nln.coefficient, nln.rss
        ),
        _ => println!("model fit: insufficient points"),
    }
    Ok(())
}

/// Parses, runs and maps the outcome to a process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let result = parse_and_validate(argv).and_then(|outcome| match outcome {
        ParseOutcome::Info(text) => {
            print!("{text}");
            Ok(())
        }
        ParseOutcome::Run(inv) => execute(&inv),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("evotransit: {e}");
            e.exit_code()
        }
    }
}
