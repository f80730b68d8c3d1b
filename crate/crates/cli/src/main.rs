use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use log::{info, warn};

use iphsem_core::config::resolve_seed;
use iphsem_core::io::{read_panel, read_samples, write_atomic, write_panel};
use iphsem_core::report::{ecdf_csv, gof_csv, read_report, truth_report, write_fit_dir};
use iphsem_core::scaling::FamilyKind;
use iphsem_core::sem::{fit, Termination};
use iphsem_core::study::{compare_with_model, run_study, simulate_panel, StudyKind};
use iphsem_core::{Error, ErrorClass, RunConfig};

const EXIT_INPUT: u8 = 2;
const EXIT_NON_CONVERGENCE: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(name = "iphsem", version, about = "Time-scaled phase-type models fitted to panel data")]
struct Cli {
    /// more log output (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a panel from the model and study blocks of a config
    Simulate(SimulateArgs),
    /// Fit a panel and write a run report directory
    Fit(FitArgs),
    /// Compare observed absorption times with a fitted model
    Gof(GofArgs),
    /// Run a simulation study and write its tables
    Study(StudyArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// panel CSV to write
    #[arg(long)]
    out: PathBuf,
    /// truth report path; defaults to `<out stem>_truth.txt`
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    panel: PathBuf,
    #[arg(long)]
    config: PathBuf,
    /// report directory
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// fit without time scaling
    #[arg(long)]
    homogeneous: bool,
    /// write every gradient-ascent step to beta_trace.csv
    #[arg(long)]
    beta_trace: bool,
    /// write the last iteration's completed paths to paths.csv
    #[arg(long)]
    dump_paths: bool,
}

#[derive(Args)]
#[command(group(ArgGroup::new("observed").required(true).args(["panel", "samples"])))]
struct GofArgs {
    /// panel CSV; absorption times are its absorbed paths' last epochs
    #[arg(long)]
    panel: Option<PathBuf>,
    /// absorption times, one per line under a `time` header
    #[arg(long)]
    samples: Option<PathBuf>,
    /// fit report directory or file
    #[arg(long)]
    fit: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// ECDFs of both samples on their merged points
    #[arg(long)]
    ecdf: Option<PathBuf>,
    /// config whose estimation seed is used when --seed is absent
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct StudyArgs {
    /// gompertz, weibull or comparison
    #[arg(long)]
    name: String,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// replicate seeds; overrides the config's study seeds
    #[arg(long = "seed", num_args = 1..)]
    seeds: Vec<u64>,
    /// number of simulated paths
    #[arg(long)]
    k: Option<usize>,
}

enum Failure {
    Core(Error),
    NotConverged(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let config = RunConfig::load(&args.config)?;
    let study = config.study()?;
    let seed = resolve_seed(args.seed, config.estimation.seed)?;
    let truth = config.truth()?;
    if study.k == 0 {
        warn!("k = 0: writing an empty panel");
    }
    let grid = config.grid(study.horizon)?;
    let panel = simulate_panel(&truth, study.k, &grid, seed)?;
    info!("{} of {} paths absorbed by {}", panel.absorbed_count(), panel.len(), study.horizon);
    write_panel(&panel, &args.out)?;
    let truth_path = args.truth.clone().unwrap_or_else(|| sibling(&args.out, "_truth.txt"));
    write_atomic(&truth_path, truth_report(&truth, seed, study.k, study.horizon).as_bytes())?;
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn fit_cmd(args: &FitArgs) -> Result<(), Failure> {
    let mut config = RunConfig::load(&args.config)?;
    if args.homogeneous {
        config.estimation.homogeneous = true;
    }
    let seed = config.resolve_seed(args.seed)?;
    let panel = read_panel(&args.panel, config.model.n)?;
    let mut fit_config = config.fit_config(seed)?;
    fit_config.keep_paths = args.dump_paths;
    let result = fit(&panel, &fit_config)?;
    for w in &result.warnings {
        warn!("{w}");
    }
    write_fit_dir(&args.out, &result, &fit_config, panel.len(), panel.absorbed_count(), args.beta_trace)?;
    if fit_config.family != FamilyKind::Identity && result.termination == Termination::MaxIterations {
        return Err(Failure::NotConverged(result.iterations_used));
    }
    Ok(())
}

fn gof_cmd(args: &GofArgs) -> Result<(), Failure> {
    let report = read_report(&args.fit)?;
    let config_seed = match &args.config {
        Some(p) => RunConfig::load(p)?.estimation.seed,
        None => None,
    };
    let seed = resolve_seed(args.seed, config_seed)?;
    let observed = match (&args.panel, &args.samples) {
        (Some(p), _) => read_panel(p, report.model.n())?.observed_absorption_times(),
        (None, Some(s)) => read_samples(s)?,
        (None, None) => unreachable!("clap requires one input"),
    };
    if observed.is_empty() {
        return Err(Error::Input {
            line: None,
            message: "input has no absorbed paths".into(),
        }
        .into());
    }
    let cmp = compare_with_model(&report.model, observed, seed)?;
    info!("D = {}, p = {}", cmp.ks.statistic, cmp.ks.p_value);
    write_atomic(&args.out, gof_csv(&cmp.ks).as_bytes())?;
    if let Some(path) = &args.ecdf {
        write_atomic(path, ecdf_csv(&cmp.observed, &cmp.simulated).as_bytes())?;
    }
    Ok(())
}

fn study_cmd(args: &StudyArgs) -> Result<(), Failure> {
    let kind: StudyKind = args.name.parse()?;
    let mut config = RunConfig::load(&args.config)?;
    let study = config
        .study
        .as_mut()
        .ok_or_else(|| Error::Config("a [study] block is required".into()))?;
    if let Some(k) = args.k {
        study.k = k;
    }
    let seeds = if !args.seeds.is_empty() {
        args.seeds.clone()
    } else if let Some(s) = &study.seeds {
        s.clone()
    } else {
        vec![resolve_seed(None, config.estimation.seed)?]
    };
    run_study(kind, &config, &seeds, &args.out)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let outcome = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Gof(a) => gof_cmd(a),
        Command::Study(a) => study_cmd(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::NotConverged(i)) => {
            eprintln!("error: stochastic EM did not converge within {i} iterations; report written");
            ExitCode::from(EXIT_NON_CONVERGENCE)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Input => EXIT_INPUT,
                ErrorClass::NonConvergence => EXIT_NON_CONVERGENCE,
                ErrorClass::Numerical => EXIT_NUMERICAL,
            })
        }
    }
}
