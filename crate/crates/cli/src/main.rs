//! `hawkes`: simulate, check, fit and benchmark marked Hawkes processes.
//!
//! Exit status: 0 on success, 1 on invalid input or usage, 2 when a run
//! fails after its inputs were accepted.

mod config;
mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hawkes_core::baseline::{bench_csv, benchmark, Sampler};
use hawkes_core::io::{read_event_stream, stream_to_json, IoError};
use hawkes_core::mcmc::{run_chain, ChainOptions, Hyperparams, McmcError, Theta};
use hawkes_core::mle::{fit_mle, MarkFamily, MleError, MleOptions, ModelShape};
use hawkes_core::rng::SeedFamily;
use hawkes_core::stationarity::stationary_intensities;
use hawkes_core::stats::Summary;
use hawkes_core::verify::{
    convergence_report, mean_intensity_curve, recalibration_experiment, FitMethod, RecalibrationConfig,
};
use hawkes_core::EventStream;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use config::{Preset, RunConfig};
use output::{check_writable, emit_json, emit_tabular, with_meta, Meta};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hawkes", version, about = "Exact simulation and calibration of marked Hawkes processes")]
struct Cli {
    /// Worker threads for replication loops.
    #[arg(long, global = true, env = "HAWKES_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration, or a bare model spec.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Built-in model used when the config has no spec.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Overrides the model horizon T.
    #[arg(long)]
    horizon: Option<f64>,
}

#[derive(Debug, Args)]
struct StreamArgs {
    /// Event file: JSON with marks, or CSV `t,z[,x]`.
    #[arg(long)]
    events: PathBuf,
    /// Dimension of a CSV stream; defaults to the largest process index.
    #[arg(long)]
    dim: Option<usize>,
    /// Horizon of a CSV stream; defaults to the last event time.
    #[arg(long = "stream-horizon")]
    stream_horizon: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one path and write it as a JSON event stream.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "exact")]
        sampler: Sampler,
    },
    /// Spectral radius, stability and stationary intensities.
    Check {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Maximum-likelihood fit of an event stream.
    FitMle {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        stream: StreamArgs,
        /// Fit a homogeneous Poisson process per dimension.
        #[arg(long)]
        poisson: bool,
        /// Skip the mark-law fit.
        #[arg(long)]
        constant_marks: bool,
    },
    /// Gibbs sampler posterior; summary JSON plus an optional JSON-lines trace.
    FitMcmc {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        stream: StreamArgs,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        thin: Option<usize>,
        /// Hold observed marks fixed.
        #[arg(long)]
        fix_marks: bool,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Event counts and time per event of several samplers, as CSV.
    Bench {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        /// Runs per sampler.
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "exact,thinning")]
        samplers: Vec<Sampler>,
    },
    /// Mean intensity on a grid over many paths, as CSV, with its
    /// distance from the stationary intensities.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        grid_step: Option<f64>,
        /// Start of the window compared with the stationary intensities;
        /// defaults to T/2.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Refit many simulated paths and tabulate estimates and errors, as CSV.
    Recalibrate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        /// Number of simulated paths.
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "mle,mcmc")]
        methods: Vec<FitMethodArg>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum FitMethodArg {
    Mle,
    Mcmc,
}

impl From<FitMethodArg> for FitMethod {
    fn from(m: FitMethodArg) -> Self {
        match m {
            FitMethodArg::Mle => FitMethod::Mle,
            FitMethodArg::Mcmc => FitMethod::Mcmc,
        }
    }
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load_opt(common.config.as_deref())?;
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    if let Some(out) = &common.out {
        check_writable(out)?;
    }
    Ok(cfg)
}

fn meta(cfg: &RunConfig) -> Meta {
    Meta::new(cfg.seed(), cfg.digest())
}

fn read_stream(args: &StreamArgs) -> Result<EventStream, CliError> {
    let read = read_event_stream(&args.events, args.dim, args.stream_horizon).map_err(|e| match e {
        IoError::Io { .. } | IoError::Parse { .. } | IoError::Validation(_) => CliError::Validation(e.to_string()),
    })?;
    if read.perturbed > 0 {
        log::warn!("{} tied timestamps were separated", read.perturbed);
    }
    Ok(read.stream)
}

fn simulate(common: Common, model: ModelArgs, sampler: Sampler) -> Result<(), CliError> {
    let mut cfg = load(&common)?;
    let spec = cfg.require_spec(model.preset, model.horizon)?;
    cfg.seed = Some(cfg.seed());
    let mut rng = SeedFamily::new(cfg.seed()).stream(0);
    let stream = sampler.run(&spec, &mut rng).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut v: serde_json::Value = serde_json::from_str(&stream_to_json(&stream)).expect("own output parses");
    v["meta"] = serde_json::to_value(meta(&cfg)).expect("meta serializes");
    log::info!("{} events on [0, {}]", stream.len(), spec.horizon);
    emit_json(common.out.as_deref(), &v)
}

fn check(common: Common, model: ModelArgs) -> Result<(), CliError> {
    let mut cfg = load(&common)?;
    let spec = cfg.require_spec(model.preset, model.horizon)?;
    let report = stationary_intensities(&spec).map_err(|e| CliError::Runtime(e.to_string()))?;
    match &report.b {
        Some(b) => eprintln!("rho={} stable={} B={:?}", report.rho, report.stable, b),
        None => eprintln!("rho={} stable={}", report.rho, report.stable),
    }
    emit_json(common.out.as_deref(), &with_meta(&report, &meta(&cfg)))
}

fn mle_error(e: MleError) -> CliError {
    match e {
        MleError::Likelihood(_) => CliError::Runtime(e.to_string()),
        _ => CliError::Validation(e.to_string()),
    }
}

fn fit_mle_cmd(common: Common, args: StreamArgs, poisson: bool, constant_marks: bool) -> Result<(), CliError> {
    let cfg = load(&common)?;
    let stream = read_stream(&args)?;
    let mut shape = if poisson { ModelShape::poisson(stream.dim) } else { ModelShape::hawkes(stream.dim) };
    if constant_marks {
        shape.marks = MarkFamily::Constant;
    }
    let fit = fit_mle(&stream, &shape, &MleOptions::default()).map_err(mle_error)?;
    eprintln!("log-likelihood {} (start {}), converged {}", fit.log_likelihood, fit.initial_log_likelihood, fit.converged);
    emit_json(common.out.as_deref(), &with_meta(&fit, &meta(&cfg)))
}

#[derive(Serialize)]
struct ChainReport<'a> {
    options: ChainOptions,
    samples: usize,
    posterior_mean: Theta,
    summary: &'a BTreeMap<String, Summary>,
}

fn mcmc_error(e: McmcError) -> CliError {
    match e {
        McmcError::InvalidHyper(_) | McmcError::Stream(_) | McmcError::DimensionMismatch { .. } => {
            CliError::Validation(e.to_string())
        }
        _ => CliError::Runtime(e.to_string()),
    }
}

#[allow(clippy::too_many_arguments)]
fn fit_mcmc_cmd(
    common: Common,
    args: StreamArgs,
    iterations: Option<usize>,
    burn_in: Option<usize>,
    thin: Option<usize>,
    fix_marks: bool,
    trace: Option<PathBuf>,
) -> Result<(), CliError> {
    let mut cfg = load(&common)?;
    if let Some(t) = &trace {
        check_writable(t)?;
    }
    let stream = read_stream(&args)?;
    let d = ChainOptions::default();
    cfg.iterations = iterations.or(cfg.iterations).or(Some(d.iterations));
    cfg.burn_in = burn_in.or(cfg.burn_in).or(Some(d.burn_in));
    cfg.thin = thin.or(cfg.thin).or(Some(d.thin));
    cfg.fix_marks = Some(fix_marks || cfg.fix_marks.unwrap_or(false));
    cfg.seed = Some(cfg.seed());
    let hyper = cfg.hyper.get_or_insert_with(|| Hyperparams::defaults(stream.dim)).clone();
    let opts = ChainOptions {
        iterations: cfg.iterations.unwrap(),
        burn_in: cfg.burn_in.unwrap(),
        thin: cfg.thin.unwrap(),
        seed: cfg.seed(),
        fix_marks: cfg.fix_marks.unwrap(),
    };
    if opts.burn_in >= opts.iterations {
        return Err(CliError::Validation("burn-in must be smaller than the iteration count".into()));
    }
    let chain = run_chain(&stream, &hyper, opts).map_err(mcmc_error)?;
    let m = meta(&cfg);
    if let Some(t) = &trace {
        let mut buf = Vec::new();
        chain.write_jsonl(&mut buf).map_err(|e| CliError::Runtime(e.to_string()))?;
        emit_tabular(Some(t), &buf, &m, None)?;
    }
    let report = ChainReport {
        options: opts,
        samples: chain.samples.len(),
        posterior_mean: chain.posterior_mean(),
        summary: &chain.summary,
    };
    emit_json(common.out.as_deref(), &with_meta(&report, &m))
}

fn bench_cmd(common: Common, model: ModelArgs, reps: Option<usize>, samplers: Vec<Sampler>) -> Result<(), CliError> {
    let mut cfg = load(&common)?;
    let spec = cfg.require_spec(model.preset, model.horizon)?;
    if spec.dim != 1 && samplers.iter().any(|s| matches!(s, Sampler::Inversion | Sampler::ExactUnivariate)) {
        return Err(CliError::Validation("inversion and exact-univariate need a one-dimensional model".into()));
    }
    cfg.reps = Some(reps.or(cfg.reps).unwrap_or(20));
    cfg.seed = Some(cfg.seed());
    let rows = benchmark(&samplers, &spec, cfg.reps.unwrap(), SeedFamily::new(cfg.seed()))
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    for r in &rows {
        eprintln!(
            "{:>16}: {:.1} events (sd {:.1}), {:.4} s/run, {:.4} us/event",
            r.sampler.name(),
            r.mean_events,
            r.sd_events,
            r.mean_time_s,
            r.time_per_event_us
        );
    }
    emit_tabular(common.out.as_deref(), bench_csv(&rows).as_bytes(), &meta(&cfg), None)
}

fn verify_cmd(
    common: Common,
    model: ModelArgs,
    reps: Option<usize>,
    grid_step: Option<f64>,
    threshold: Option<f64>,
) -> Result<(), CliError> {
    let mut cfg = load(&common)?;
    let horizon = model.horizon.or(cfg.spec.is_none().then_some(10.0));
    let spec = cfg.require_spec(model.preset, horizon)?;
    cfg.reps = Some(reps.or(cfg.reps).unwrap_or(1_000));
    cfg.grid_step = Some(grid_step.or(cfg.grid_step).unwrap_or(spec.horizon / 100.0));
    cfg.threshold = Some(threshold.or(cfg.threshold).unwrap_or(spec.horizon / 2.0));
    cfg.seed = Some(cfg.seed());
    let step = cfg.grid_step.unwrap();
    if !(step > 0.0) || cfg.reps == Some(0) {
        return Err(CliError::Validation("grid step and reps must be positive".into()));
    }
    let n = (spec.horizon / step).floor() as usize;
    let grid: Vec<f64> = (1..=n).map(|k| k as f64 * step).collect();
    let b = stationary_intensities(&spec)
        .map_err(|e| CliError::Runtime(e.to_string()))?
        .b
        .ok_or_else(|| CliError::Validation("model is not stable; no stationary intensity to compare".into()))?;
    let est = mean_intensity_curve(&spec, cfg.reps.unwrap(), &grid, SeedFamily::new(cfg.seed()))
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let report = convergence_report(&est, &b, cfg.threshold.unwrap());
    eprintln!(
        "max relative deviation {:.5} at t = {} (process {}), B = {:?}",
        report.max_relative_deviation, report.at_time, report.process, b
    );
    let extra = json!({ "B": b, "convergence": report });
    emit_tabular(common.out.as_deref(), est.to_csv().as_bytes(), &meta(&cfg), Some(extra))
}

fn recalibrate_cmd(
    common: Common,
    model: ModelArgs,
    reps: Option<usize>,
    methods: Vec<FitMethodArg>,
    iterations: Option<usize>,
    burn_in: Option<usize>,
) -> Result<(), CliError> {
    let mut cfg = load(&common)?;
    let spec = cfg.require_spec(model.preset, model.horizon)?;
    cfg.reps = Some(reps.or(cfg.reps).unwrap_or(25));
    cfg.seed = Some(cfg.seed());
    let mut rc = RecalibrationConfig::new(spec.dim, cfg.reps.unwrap(), methods.into_iter().map(Into::into).collect());
    if let Some(h) = &cfg.hyper {
        rc.hyper = h.clone();
    }
    rc.chain.iterations = iterations.or(cfg.iterations).unwrap_or(rc.chain.iterations);
    rc.chain.burn_in = burn_in.or(cfg.burn_in).unwrap_or(rc.chain.burn_in);
    if rc.chain.burn_in >= rc.chain.iterations {
        return Err(CliError::Validation("burn-in must be smaller than the iteration count".into()));
    }
    cfg.iterations = Some(rc.chain.iterations);
    cfg.burn_in = Some(rc.chain.burn_in);
    let report = recalibration_experiment(&spec, &rc, SeedFamily::new(cfg.seed()))
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    for m in &report.methods {
        eprintln!(
            "{}: {} fitted, {} failed, per-process MSE {:?}",
            m.method.name(),
            m.fitted,
            m.failures,
            m.process_mse
        );
    }
    emit_tabular(common.out.as_deref(), report.to_csv().as_bytes(), &meta(&cfg), None)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Validation("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate { common, model, sampler } => simulate(common, model, sampler),
        Command::Check { common, model } => check(common, model),
        Command::FitMle { common, stream, poisson, constant_marks } => fit_mle_cmd(common, stream, poisson, constant_marks),
        Command::FitMcmc { common, stream, iterations, burn_in, thin, fix_marks, trace } => {
            fit_mcmc_cmd(common, stream, iterations, burn_in, thin, fix_marks, trace)
        }
        Command::Bench { common, model, reps, samplers } => bench_cmd(common, model, reps, samplers),
        Command::Verify { common, model, reps, grid_step, threshold } => {
            verify_cmd(common, model, reps, grid_step, threshold)
        }
        Command::Recalibrate { common, model, reps, methods, iterations, burn_in } => {
            recalibrate_cmd(common, model, reps, methods, iterations, burn_in)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

