use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rbfsearch::io::bench::{run_bench, suite, Algorithm, BenchSpec, BudgetRule};
use rbfsearch::io::config::RunConfig;
use rbfsearch::io::log::{write_event_log, write_result_log};
use rbfsearch::io::protocol::params_for;
use rbfsearch::{optimize, run_parallel, Error};

#[derive(Parser)]
#[command(name = "rbfsearch", version, about = "Surrogate-based optimization of expensive black-box functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the optimizer described by a configuration file.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_evals: Option<usize>,
        #[arg(long)]
        max_seconds: Option<f64>,
        /// Result log (one JSON line per evaluation).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Scheduler event log, for parallel runs.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Run the benchmark suite and report solved counts and speedups.
    Bench {
        /// `standard`, `quick`, or a comma-separated list of function names.
        #[arg(long, default_value = "standard")]
        suite: String,
        #[arg(long, default_value = "1", value_delimiter = ',')]
        workers: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        /// Uniform per-evaluation delay range in milliseconds.
        #[arg(long, default_value = "50:100")]
        latency_ms: String,
        /// Also run random search with the same budget.
        #[arg(long)]
        compare_random: bool,
        /// Stop each run once it is within 1% of the optimum.
        #[arg(long)]
        stop_when_solved: bool,
        /// Evaluation budget; defaults to 60(n+1).
        #[arg(long)]
        max_evals: Option<usize>,
        /// JSON report.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the configuration a box point decodes to.
    Decode {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Domain(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<rbfsearch::error::ConfigError> for Failure {
    fn from(e: rbfsearch::error::ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", path.display())))
}

#[allow(clippy::too_many_arguments)]
fn cmd_optimize(
    config: &Path,
    workers: Option<usize>,
    seed: Option<u64>,
    max_evals: Option<usize>,
    max_seconds: Option<f64>,
    output: Option<&Path>,
    events: Option<&Path>,
) -> Result<(), Failure> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(w) = workers {
        cfg.workers = w;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if max_evals.is_some() {
        cfg.budget.max_evaluations = max_evals;
    }
    if max_seconds.is_some() {
        cfg.budget.max_seconds = max_seconds;
    }
    let run = cfg.resolve()?;
    let design = run.engine.design_size(run.domain.dim());
    if let Some(max) = run.budget.max_evaluations.filter(|&m| m <= design) {
        return Err(Failure::Config(format!(
            "max evaluations {max} leaves no search iterations after the {design}-point initial design"
        )));
    }
    let (result, event_log) = if run.workers == 1 {
        (optimize(&run.evaluator, &run.domain, run.sense, &run.budget, &run.engine, run.seed)?, None)
    } else {
        let r = run_parallel(&run.evaluator, &run.domain, run.sense, &run.budget, &run.engine, run.workers, run.seed)?;
        (r.result, Some(r.events))
    };
    if let Some(path) = output {
        write_result_log(create(path)?, &result, run.space.as_ref())?;
    }
    if let (Some(path), Some(ev)) = (events, &event_log) {
        write_event_log(create(path)?, ev, run.space.as_ref())?;
    }
    let params = params_for(run.space.as_ref(), &result.best_point).ok();
    let summary = serde_json::json!({
        "best_value": result.best_value,
        "best_point": result.best_point,
        "best_params": params,
        "evaluations": result.evaluations.len(),
        "failed": result.evaluations.iter().filter(|r| r.failed).count(),
        "stopped_because": result.stopped_because,
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(())
}

fn parse_latency(s: &str) -> Result<Option<(f64, f64)>, Failure> {
    let bad = || Failure::Config(format!("--latency-ms expects A:B in milliseconds, got '{s}'"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    Ok(if a == 0.0 && b == 0.0 { None } else { Some((a, b)) })
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    suite_name: &str,
    workers: Vec<usize>,
    seeds: usize,
    latency: &str,
    compare_random: bool,
    stop_when_solved: bool,
    max_evals: Option<usize>,
    output: Option<&Path>,
) -> Result<(), Failure> {
    let mut spec = BenchSpec::new(suite(suite_name)?);
    spec.worker_counts = workers;
    spec.seeds = seeds;
    spec.latency_ms = parse_latency(latency)?;
    spec.stop_when_solved = stop_when_solved;
    if compare_random {
        spec.algorithms.push(Algorithm::RandomSearch);
    }
    if let Some(m) = max_evals {
        spec.budget = BudgetRule::Fixed(m);
    }
    let report = run_bench(&spec, output)?;
    print!("{}", report.render());
    Ok(())
}

fn cmd_decode(config: &Path, point: &str) -> Result<(), Failure> {
    let cfg = RunConfig::load(config)?;
    let x = point
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Config(format!("--point: {e}")))?;
    let domain = cfg.domain()?;
    if x.len() != domain.dim() {
        return Err(Failure::Config(format!("--point has {} coordinates, the box has {}", x.len(), domain.dim())));
    }
    domain.scale_to_unit(&x).map_err(|e| Failure::Config(e.to_string()))?;
    let decoded = match &cfg.space {
        Some(space) => space.decode(&x)?,
        None => params_for(None, &domain.snap_integers(&x)).map_err(|e| Failure::Config(e.to_string()))?,
    };
    println!("{}", serde_json::to_string(&decoded).expect("configuration serializes"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Optimize { config, workers, seed, max_evals, max_seconds, output, events } => cmd_optimize(
            &config,
            workers,
            seed,
            max_evals,
            max_seconds,
            output.as_deref(),
            events.as_deref(),
        ),
        Command::Bench { suite, workers, seeds, latency_ms, compare_random, stop_when_solved, max_evals, output } => {
            cmd_bench(&suite, workers, seeds, &latency_ms, compare_random, stop_when_solved, max_evals, output.as_deref())
        }
        Command::Decode { config, point } => cmd_decode(&config, &point),
    };
    let _ = std::io::stdout().flush();
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
