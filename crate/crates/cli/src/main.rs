//! `gftac`: run, sweep and verify attitude-control scenarios.
//!
//! Results go to stdout as JSON. Failures print one JSON object
//! `{"error": <kind>, "message": <text>}` to stderr and exit nonzero.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gftac::config::{ConfigError, ScenarioConfig};
use gftac::presets;
use gftac::runner::{self, RunError, RunSummary};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "gftac", version, about = "Hybrid finite-time attitude tracking simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write config, trace, jump log and summary.
    Run {
        config: PathBuf,
        /// Output directory (default: runs/<scenario name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the noise seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one variant per value of a numeric parameter.
    Sweep {
        config: PathBuf,
        /// Parameter name, e.g. alpha1, k2, controller.delta.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate and run the analysis suite without writing files.
    Verify { config: PathBuf },
    /// Print a preset config as TOML, or list the preset names.
    Presets { name: Option<String> },
}

/// Exit codes by failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Failure {
    Usage = 2,
    Config = 3,
    Simulation = 4,
    Io = 5,
    Verification = 6,
}

struct CliError {
    kind: &'static str,
    class: Failure,
    message: String,
}

impl CliError {
    fn new(kind: &'static str, class: Failure, message: impl Into<String>) -> Self {
        Self {
            kind,
            class,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Self::new("io", Failure::Io, e.to_string()),
            _ => Self::new("config", Failure::Config, e.to_string()),
        }
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        let class = match e.kind() {
            "config" | "empty_sweep" => Failure::Config,
            "zeno" | "blowup" => Failure::Simulation,
            _ => Failure::Io,
        };
        Self::new(e.kind(), class, e.to_string())
    }
}

#[derive(Serialize)]
struct SweepEntry<'a> {
    name: &'a str,
    value: f64,
    settling_time: Option<f64>,
    steady_state_error: f64,
    final_error: f64,
    jump_count: usize,
    bounds_hold: bool,
    summary_path: &'a std::path::Path,
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            Err(CliError::new("io", Failure::Io, format!("stdout: {e}")))
        }
        _ => Ok(()),
    }
}

fn print_json<T: Serialize>(v: &T) -> Result<(), CliError> {
    let s = serde_json::to_string_pretty(v).map_err(|e| CliError::new("io", Failure::Io, e.to_string()))?;
    emit(&format!("{s}\n"))
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { config, out, seed } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out = out.unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name));
            let summary = runner::run(&cfg, &out)?;
            print_json(&summary)
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let cfg = ScenarioConfig::load(&config)?;
            let out = out.unwrap_or_else(|| PathBuf::from("runs").join(format!("{}_sweep", cfg.name)));
            let summaries: Vec<RunSummary> = runner::sweep(&cfg, &param, &values, &out)?;
            let entries: Vec<SweepEntry> = summaries
                .iter()
                .zip(&values)
                .map(|(s, &value)| SweepEntry {
                    name: &s.name,
                    value,
                    settling_time: s.analysis.convergence.settling_time,
                    steady_state_error: s.analysis.convergence.steady_state_error,
                    final_error: s.analysis.convergence.final_error,
                    jump_count: s.analysis.convergence.jump_count,
                    bounds_hold: s.analysis.passed(),
                    summary_path: &s.summary_path,
                })
                .collect();
            print_json(&entries)
        }
        Command::Verify { config } => {
            let cfg = ScenarioConfig::load(&config)?;
            let report = runner::verify(&cfg)?;
            print_json(&report)?;
            if report.passed() {
                Ok(())
            } else {
                Err(CliError::new(
                    "verification_failed",
                    Failure::Verification,
                    format!("{}: a guaranteed bound was violated", cfg.name),
                ))
            }
        }
        Command::Presets { name: None } => print_json(&presets::PRESET_NAMES),
        Command::Presets { name: Some(n) } => {
            let cfg = presets::by_name(&n).ok_or_else(|| {
                CliError::new(
                    "unknown_preset",
                    Failure::Usage,
                    format!("unknown preset `{n}`; expected one of {:?}", presets::PRESET_NAMES),
                )
            })?;
            emit(&cfg.to_toml_string())
        }
    }
}

fn fail(e: &CliError) -> ExitCode {
    let body = serde_json::json!({ "error": e.kind, "message": e.message });
    eprintln!("{body}");
    ExitCode::from(e.class as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::new("usage", Failure::Usage, e.to_string().trim_end())),
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
