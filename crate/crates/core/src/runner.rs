//! Runs scenarios, persists traces and summaries, and fans sweeps out over
//! worker threads.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::lyapunov::{sigma1, sigma2, sigma3};
use crate::analysis::metrics::{
    bound_checks, convergence_metrics, flow_decrease_check, jump_decrease_check, BoundReport, ConvergenceReport,
    FlowCheck, JumpDecreaseCheck, LyapunovColumn, DEFAULT_ERR_THRESHOLD, FLOW_SLACK,
};
use crate::config::{ConfigError, ScenarioConfig};
use crate::par;
use crate::sim::{run_scenario, ControllerSpec, JumpVariable, Scenario, SimError, SimTrace, TraceError};

pub const TRACE_FILE: &str = "trace.csv";
pub const JUMPS_FILE: &str = "jumps.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("simulation aborted: {0}")]
    Sim(#[from] SimError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("sweep over an empty value list")]
    EmptySweep,
}

impl RunError {
    /// Short machine-readable tag for CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Sim(SimError::Zeno { .. }) => "zeno",
            RunError::Sim(SimError::Blowup { .. }) => "blowup",
            RunError::Sim(SimError::Config(_)) => "config",
            RunError::Trace(_) => "trace",
            RunError::Io { .. } => "io",
            RunError::EmptySweep => "empty_sweep",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Analysis results for one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub convergence: ConvergenceReport,
    pub bounds: BoundReport,
    pub flow: Vec<(LyapunovColumn, FlowCheck)>,
    pub jump_decrease: Vec<(JumpVariable, JumpDecreaseCheck)>,
    pub max_norm_drift: f64,
}

impl AnalysisReport {
    /// The guaranteed bounds hold. Flow monotonicity is reported but only
    /// expected for noise-free runs.
    pub fn passed(&self) -> bool {
        self.bounds.all_hold()
    }
}

pub fn analyze(trace: &SimTrace, sc: &Scenario) -> AnalysisReport {
    let mut flow = vec![(
        LyapunovColumn::V1,
        flow_decrease_check(trace, LyapunovColumn::V1, FLOW_SLACK),
    )];
    let mut jump_decrease = Vec::new();
    match &sc.controller {
        ControllerSpec::FullState { gains } => {
            jump_decrease.push((
                JumpVariable::H,
                jump_decrease_check(trace, JumpVariable::H, sigma1(gains.k1, gains.alpha1, gains.delta)),
            ));
        }
        ControllerSpec::BiasedGyro { gains, observer, .. } => {
            flow.push((
                LyapunovColumn::V2,
                flow_decrease_check(trace, LyapunovColumn::V2, FLOW_SLACK),
            ));
            jump_decrease.push((
                JumpVariable::H,
                jump_decrease_check(trace, JumpVariable::H, sigma1(gains.k1, gains.alpha1, gains.delta)),
            ));
            jump_decrease.push((
                JumpVariable::HTilde,
                jump_decrease_check(
                    trace,
                    JumpVariable::HTilde,
                    sigma2(observer.mu2, observer.beta1, observer.delta),
                ),
            ));
        }
        ControllerSpec::AttitudeOnly { gains, .. } => {
            flow.push((
                LyapunovColumn::V3,
                flow_decrease_check(trace, LyapunovColumn::V3, FLOW_SLACK),
            ));
            jump_decrease.push((
                JumpVariable::Joint,
                jump_decrease_check(
                    trace,
                    JumpVariable::Joint,
                    sigma3(gains.k1, gains.k2, gains.alpha3, gains.delta),
                ),
            ));
        }
    }
    AnalysisReport {
        convergence: convergence_metrics(trace, DEFAULT_ERR_THRESHOLD),
        bounds: bound_checks(trace, sc),
        flow,
        jump_decrease,
        max_norm_drift: trace.max_norm_drift,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub kind: String,
    pub seed: u64,
    pub analysis: AnalysisReport,
    pub config_path: PathBuf,
    pub trace_path: PathBuf,
    pub jumps_path: PathBuf,
    pub summary_path: PathBuf,
    /// SHA-256 over the trace and jump files; equal seeds give equal digests.
    pub digest: String,
}

/// Builds and simulates a config without touching the filesystem.
pub fn simulate(cfg: &ScenarioConfig) -> Result<(Scenario, SimTrace), RunError> {
    let sc = cfg.build()?;
    let trace = run_scenario(&sc)?;
    Ok((sc, trace))
}

/// Simulation plus the analysis suite; nothing is written.
pub fn verify(cfg: &ScenarioConfig) -> Result<AnalysisReport, RunError> {
    let (sc, trace) = simulate(cfg)?;
    Ok(analyze(&trace, &sc))
}

fn csv_bytes(trace: &SimTrace) -> Result<(Vec<u8>, Vec<u8>), RunError> {
    let mut rec = Vec::new();
    trace.write_records_csv(&mut rec)?;
    let mut jumps = Vec::new();
    trace.write_jumps_csv(&mut jumps)?;
    Ok((rec, jumps))
}

pub fn digest(records_csv: &[u8], jumps_csv: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(records_csv);
    h.update(jumps_csv);
    hex::encode(h.finalize())
}

/// Simulates `cfg` and writes config, trace, jump log and summary into
/// `out_dir` (created if missing).
pub fn run(cfg: &ScenarioConfig, out_dir: impl AsRef<Path>) -> Result<RunSummary, RunError> {
    let out = out_dir.as_ref();
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let (sc, trace) = simulate(cfg)?;
    let analysis = analyze(&trace, &sc);
    let (rec, jumps) = csv_bytes(&trace)?;

    let config_path = out.join(CONFIG_FILE);
    cfg.save(&config_path)?;
    let trace_path = out.join(TRACE_FILE);
    std::fs::write(&trace_path, &rec).map_err(io_err(&trace_path))?;
    let jumps_path = out.join(JUMPS_FILE);
    std::fs::write(&jumps_path, &jumps).map_err(io_err(&jumps_path))?;

    let summary_path = out.join(SUMMARY_FILE);
    let summary = RunSummary {
        name: cfg.name.clone(),
        kind: cfg.kind.as_str().to_string(),
        seed: cfg.seed,
        analysis,
        config_path,
        trace_path,
        jumps_path,
        summary_path: summary_path.clone(),
        digest: digest(&rec, &jumps),
    };
    let f = File::create(&summary_path).map_err(io_err(&summary_path))?;
    serde_json::to_writer_pretty(BufWriter::new(f), &summary).map_err(|e| RunError::Io {
        path: summary_path.display().to_string(),
        source: e.into(),
    })?;
    log::info!("{}: wrote {}", cfg.name, out.display());
    Ok(summary)
}

/// Reloads a trace written by [`run`] from `out_dir`.
pub fn load_trace(cfg: &ScenarioConfig, out_dir: impl AsRef<Path>) -> Result<SimTrace, RunError> {
    let out = out_dir.as_ref();
    let open = |name: &str| {
        let p = out.join(name);
        File::open(&p).map_err(io_err(&p))
    };
    Ok(SimTrace::read_csv(cfg.kind, open(TRACE_FILE)?, open(JUMPS_FILE)?)?)
}

/// One variant of `cfg` per value of `param`, each written to
/// `out_dir/<param>_<value>`. Runs in parallel when the feature is on;
/// results keep the order of `values`.
pub fn sweep(
    cfg: &ScenarioConfig,
    param: &str,
    values: &[f64],
    out_dir: impl AsRef<Path>,
) -> Result<Vec<RunSummary>, RunError> {
    if values.is_empty() {
        return Err(RunError::EmptySweep);
    }
    let variants = values
        .iter()
        .map(|&v| {
            let mut c = cfg.clone();
            c.set_param(param, v)?;
            c.name = format!("{}_{param}_{v}", cfg.name);
            c.build()?;
            Ok((c, out_dir.as_ref().join(format!("{param}_{v}"))))
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    par::map(&variants, |(c, dir)| run(c, dir)).into_iter().collect()
}
