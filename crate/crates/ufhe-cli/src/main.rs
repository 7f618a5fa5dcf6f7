//! `ufhe` — benchmark harness and application driver for the library:
//! parameter tools, self-tests, comparison microbenchmarks, and the
//! sort / min / private-query demos, all with JSON reports.

mod apps;
mod bench;
mod params;
mod report;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use ufhe::compare::CircuitKind;

const DEFAULT_SEED: u64 = 2024;

#[derive(Parser)]
#[command(
    name = "ufhe",
    version,
    about = "Homomorphic comparison toolkit: self-tests, parameter sets, benchmarks, and demo apps"
)]
struct Cli {
    /// JSON config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the invariant suites at toy scale.
    Selftest {
        /// Corrupt the cached transform plans first; the run must fail.
        #[arg(long)]
        inject_fault: bool,
    },
    /// Parameter-set catalog tools.
    Params {
        #[command(subcommand)]
        action: ParamsAction,
    },
    /// Microbenchmarks.
    Bench {
        #[command(subcommand)]
        what: BenchWhat,
    },
    /// Demo applications.
    App {
        #[command(subcommand)]
        which: AppWhich,
    },
}

#[derive(Subcommand)]
enum ParamsAction {
    /// Print the full catalog.
    List,
    /// Validate parameter sets from a JSON file (one object or a list).
    Validate { file: PathBuf },
}

#[derive(Subcommand)]
enum BenchWhat {
    /// End-to-end integer comparison.
    Compare {
        /// Parameter set name (see `params list`).
        #[arg(long)]
        param: Option<String>,
        /// Override the set's digit circuit kind.
        #[arg(long, value_enum)]
        circuit: Option<CircuitArg>,
        /// Timed repetitions.
        #[arg(long)]
        reps: Option<usize>,
        /// Worker threads for independent comparison jobs.
        #[arg(long)]
        workers: Option<usize>,
        /// Write the JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum AppWhich {
    /// Sort encrypted integers (ranks need n <= p).
    Sort(AppArgs),
    /// Tournament minimum of encrypted integers.
    Min(AppArgs),
    /// Straightlined private query against an encrypted operation tag.
    PrivateQuery(AppArgs),
}

#[derive(Args, Clone)]
struct AppArgs {
    /// Parameter set name (see `params list`).
    #[arg(long)]
    param: Option<String>,
    /// Number of integers.
    #[arg(long)]
    n: Option<usize>,
    /// Bit width of each integer.
    #[arg(long)]
    bits: Option<u32>,
    /// Private-query operation: add, mult, or power.
    #[arg(long)]
    query: Option<String>,
    /// Exponent for the power branch of the private query.
    #[arg(long)]
    op2: Option<u64>,
    /// Compact sparse result ciphertexts: on or off.
    #[arg(long, value_enum)]
    compaction: Option<OnOff>,
    /// Overlap the private query's helper leg: on or off.
    #[arg(long, value_enum)]
    nonblocking: Option<OnOff>,
    /// Write the JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CircuitArg {
    Bivariate,
    Univariate,
}

impl From<CircuitArg> for CircuitKind {
    fn from(c: CircuitArg) -> Self {
        match c {
            CircuitArg::Bivariate => CircuitKind::Bivariate,
            CircuitArg::Univariate => CircuitKind::Univariate,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum OnOff {
    On,
    Off,
}

impl OnOff {
    fn as_bool(self) -> bool {
        self == OnOff::On
    }
}

/// Optional values from the `--config` JSON file.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    /// Default parameter set name.
    params: Option<String>,
    bench: Option<FileBench>,
    apps: Option<FileApps>,
    seed: Option<u64>,
    workers: Option<usize>,
    /// Serialize all scheduling (1 worker, blocking pipeline).
    deterministic: Option<bool>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileBench {
    circuit: Option<String>,
    reps: Option<usize>,
    json: Option<PathBuf>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileApps {
    n: Option<usize>,
    bits: Option<u32>,
    query: Option<String>,
    op2: Option<u64>,
    compaction: Option<String>,
    nonblocking: Option<String>,
}

fn load_config(path: Option<&PathBuf>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

/// Seed precedence: UFHE_SEED env, then config file, then the default.
fn resolve_seed(cfg: &FileConfig) -> Result<u64> {
    match std::env::var("UFHE_SEED") {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .with_context(|| format!("UFHE_SEED must be an unsigned integer, got {v:?}")),
        Err(_) => Ok(cfg.seed.unwrap_or(DEFAULT_SEED)),
    }
}

fn parse_on_off(s: &str, what: &str) -> Result<bool> {
    match s {
        "on" => Ok(true),
        "off" => Ok(false),
        other => anyhow::bail!("{what} must be \"on\" or \"off\", got {other:?}"),
    }
}

fn run() -> Result<i32> {
    let cli = Cli::parse();
    let cfg = load_config(cli.config.as_ref())?;
    let seed = resolve_seed(&cfg)?;
    let deterministic = cfg.deterministic.unwrap_or(false);

    match cli.command {
        Command::Selftest { inject_fault } => selftest::run(inject_fault),
        Command::Params { action } => match action {
            ParamsAction::List => {
                println!(
                    "{:<8} {:<9} {:>3} {:>6} {:<10} {:>3} {:>3} {:>5} {:>6} {:>7}",
                    "name", "source", "p", "m", "circuit", "d", "l", "bits", "levels", "lambda"
                );
                for s in params::catalog() {
                    println!(
                        "{:<8} {:<9} {:>3} {:>6} {:<10} {:>3} {:>3} {:>5} {:>6} {:>7}",
                        s.name,
                        s.source,
                        s.p,
                        s.m,
                        s.circuit,
                        s.d,
                        s.l,
                        s.prime_bits,
                        s.levels,
                        s.lambda_advisory
                    );
                }
                Ok(0)
            }
            ParamsAction::Validate { file } => {
                let text = std::fs::read_to_string(&file)
                    .with_context(|| format!("reading {}", file.display()))?;
                let sets: Vec<params::ParamSet> = match serde_json::from_str(&text) {
                    Ok(many) => many,
                    Err(_) => vec![serde_json::from_str(&text)
                        .with_context(|| format!("parsing {}", file.display()))?],
                };
                let mut bad = 0usize;
                for set in &sets {
                    match params::validate(set) {
                        Ok(msg) => println!("{}: {msg}", set.name),
                        Err(e) => {
                            println!("{}: INVALID ({e})", set.name);
                            bad += 1;
                        }
                    }
                }
                Ok(if bad == 0 { 0 } else { 1 })
            }
        },
        Command::Bench { what } => match what {
            BenchWhat::Compare {
                param,
                circuit,
                reps,
                workers,
                json,
            } => {
                let file_bench = cfg.bench.unwrap_or_default();
                let name = param
                    .or_else(|| cfg.params.clone())
                    .unwrap_or_else(|| "t3b".to_string());
                let circuit = match (circuit, file_bench.circuit.as_deref()) {
                    (Some(c), _) => Some(c.into()),
                    (None, Some("bivariate")) => Some(CircuitKind::Bivariate),
                    (None, Some("univariate")) => Some(CircuitKind::Univariate),
                    (None, Some(other)) => {
                        anyhow::bail!("config bench.circuit: unknown kind {other:?}")
                    }
                    (None, None) => None,
                };
                let run_cfg = bench::BenchConfig {
                    set: params::find(&name)?,
                    circuit,
                    reps: reps.or(file_bench.reps).unwrap_or(5).max(1),
                    workers: workers.or(cfg.workers).unwrap_or(1).max(1),
                    seed,
                    deterministic,
                };
                let report = bench::run(&run_cfg)?;
                report.print_summary();
                if let Some(path) = json.or(file_bench.json) {
                    report.write_json(&path)?;
                    println!("report written to {}", path.display());
                }
                Ok(if report.verified { 0 } else { 1 })
            }
        },
        Command::App { which } => {
            let (kind, args) = match which {
                AppWhich::Sort(a) => ("sort", a),
                AppWhich::Min(a) => ("min", a),
                AppWhich::PrivateQuery(a) => ("private-query", a),
            };
            let file_apps = cfg.apps.unwrap_or_default();
            let default_param = match kind {
                "sort" => "t17",
                _ => "t5",
            };
            let name = args
                .param
                .clone()
                .or_else(|| cfg.params.clone())
                .unwrap_or_else(|| default_param.to_string());
            let compaction = match (&args.compaction, file_apps.compaction.as_deref()) {
                (Some(c), _) => c.as_bool(),
                (None, Some(s)) => parse_on_off(s, "config apps.compaction")?,
                (None, None) => true,
            };
            let nonblocking = match (&args.nonblocking, file_apps.nonblocking.as_deref()) {
                (Some(c), _) => c.as_bool(),
                (None, Some(s)) => parse_on_off(s, "config apps.nonblocking")?,
                (None, None) => false,
            };
            let app_cfg = apps::AppConfig {
                set: params::find(&name)?,
                n: args.n.or(file_apps.n).unwrap_or(16).max(1),
                bits: args.bits.or(file_apps.bits).unwrap_or(match kind {
                    "min" => 16,
                    _ => 8,
                }),
                query: args
                    .query
                    .clone()
                    .or(file_apps.query)
                    .unwrap_or_else(|| "add".to_string()),
                op2: args.op2.or(file_apps.op2).unwrap_or(64),
                compaction,
                nonblocking,
                workers: cfg.workers.unwrap_or(1).max(1),
                seed,
                deterministic,
            };
            let report = match kind {
                "sort" => apps::run_sort(&app_cfg)?,
                "min" => apps::run_min(&app_cfg)?,
                _ => apps::run_private_query(&app_cfg)?,
            };
            report.print_summary();
            if let Some(path) = args.json {
                report.write_json(&path)?;
                println!("report written to {}", path.display());
            }
            Ok(if report.verified { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => ExitCode::from(code.clamp(1, 125) as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
