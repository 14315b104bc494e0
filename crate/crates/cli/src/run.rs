use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vi_sharp::oracle::{
    load_or_compute, oracle_extragradient_with, oracle_grid_with, ExtragradientOptions, GridOptions,
};
use vi_sharp::solver::{resolve_lambda, solve_with_sink, CsvTraceWriter, TextTraceWriter, TraceSink, EXPERIMENTAL_MARKER};
use vi_sharp::{
    LambdaChoice, OracleCertificate64, OracleMethod, Problem64, SolveResult64, StepSchedule, ViError, VERSION,
};

use crate::config::{ensure_writable, LambdaSetting, OracleKind, RunConfig, TraceFormat};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub problem: String,
    pub dim: usize,
    pub best: Vec<f64>,
    pub best_iter: usize,
    pub best_residual: f64,
    pub certified_eps: f64,
    /// `distance-to-solution` or `natural-residual`.
    pub certified_by: String,
    pub target_met: bool,
    pub restarts: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub last_restart: Option<usize>,
    pub iters_run: usize,
    pub schedule: String,
    pub experimental: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub epsilon: f64,
    pub lambda: f64,
    pub lambda_bound: f64,
    pub m_hat: f64,
    pub restart_radius: f64,
    pub trace_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub method: OracleMethod,
    pub x_star: Vec<f64>,
    pub residual: f64,
    pub min_gap: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub tool_version: String,
    pub result: ResultSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSummary>,
    /// The configuration actually run, command-line overrides included.
    pub config: RunConfig,
}

impl Summary {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Other(format!("summary: {}", e.message())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("summary serializes")
    }
}

impl From<&OracleCertificate64> for OracleSummary {
    fn from(c: &OracleCertificate64) -> Self {
        OracleSummary {
            method: c.method,
            x_star: c.x_star.to_f64_vec(),
            residual: c.residual,
            min_gap: c.min_gap,
            accepted: c.is_accepted(),
        }
    }
}

/// Computes (or reuses, when `oracle.cache_path` is set) a reference solution.
pub fn oracle(cfg: &RunConfig, problem: &Problem64) -> Result<OracleCertificate64, CliError> {
    cfg.validate_oracle()?;
    let seed = cfg.solver.seed;
    let method = match cfg.oracle.kind {
        OracleKind::Auto if problem.known_solution().is_some() => OracleMethod::Analytic,
        OracleKind::Auto if problem.dim() <= 3 => OracleMethod::Grid,
        OracleKind::Auto | OracleKind::Extragradient => OracleMethod::Extragradient,
        OracleKind::Grid => OracleMethod::Grid,
    };
    if method == OracleMethod::Grid && problem.dim() > 3 {
        return Err(CliError::Config(format!(
            "oracle.kind: grid search supports at most 3 dimensions, problem has {}",
            problem.dim()
        )));
    }
    if method == OracleMethod::Extragradient && !problem.operator.monotone {
        return Err(CliError::Config(
            "oracle.kind: extragradient needs a monotone operator; use \"grid\"".into(),
        ));
    }
    let compute = || -> vi_sharp::Result<OracleCertificate64> {
        match method {
            OracleMethod::Analytic => {
                let x = problem.known_solution().cloned().ok_or(ViError::NotMonotone)?;
                OracleCertificate64::analytic(problem, x, seed)
            }
            OracleMethod::Grid => {
                let mut opts = GridOptions::for_dim(problem.dim());
                opts.min_spacing = cfg.oracle.tolerance;
                oracle_grid_with(problem, &opts)
            }
            OracleMethod::Extragradient => {
                let opts = ExtragradientOptions {
                    tol: cfg.oracle.tolerance,
                    seed,
                    ..ExtragradientOptions::default()
                };
                oracle_extragradient_with(problem, &opts)
            }
        }
    };
    let cert = match &cfg.oracle.cache_path {
        Some(_) => {
            let path = cfg.certificate_path();
            ensure_writable(&path, "oracle.cache_path")?;
            load_or_compute(&path, problem, method, seed, compute)?
        }
        None => compute()?,
    };
    if !cert.is_accepted() {
        warn!(
            "oracle certificate not accepted: residual {:e}, min gap {:e}",
            cert.residual, cert.min_gap
        );
    }
    Ok(cert)
}

struct Prepared {
    problem: Problem64,
    cert: Option<OracleCertificate64>,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let mut problem = cfg.build_problem()?;
    cfg.solver_config(&problem)?;
    cfg.penalty_method()?;
    cfg.validate_oracle()?;
    let cert = if cfg.oracle.enabled {
        let c = oracle(cfg, &problem)?;
        if c.is_accepted() {
            problem.operator.known_solution = Some(c.x_star.clone());
        }
        Some(c)
    } else {
        None
    };
    Ok(Prepared { problem, cert })
}

fn solve_to_trace(cfg: &RunConfig, problem: &Problem64, trace_path: &Path) -> Result<SolveResult64, CliError> {
    let solver = cfg.solver_config(problem)?;
    let method = cfg.penalty_method()?;
    let file = File::create(trace_path)
        .map_err(|e| CliError::Config(format!("output.trace_path: cannot write {}: {e}", trace_path.display())))?;
    let result = match cfg.output.format {
        TraceFormat::Csv => {
            let mut sink = CsvTraceWriter::new(file);
            let r = solve_with_sink(problem, &solver, method, &mut sink);
            TraceSink::<f64>::flush(&mut sink)?;
            r
        }
        TraceFormat::StructuredText => {
            let mut sink = TextTraceWriter::new(file);
            let r = solve_with_sink(problem, &solver, method, &mut sink);
            TraceSink::<f64>::flush(&mut sink)?;
            r
        }
    };
    Ok(result?)
}

fn summarize(
    cfg: &RunConfig,
    problem: &Problem64,
    result: &SolveResult64,
    cert: Option<&OracleCertificate64>,
    trace_path: &Path,
) -> Summary {
    Summary {
        tool_version: VERSION.to_string(),
        result: ResultSummary {
            problem: problem.name.clone(),
            dim: problem.dim(),
            best: result.best.to_f64_vec(),
            best_iter: result.best_iter,
            best_residual: result.best_residual,
            certified_eps: result.certified_eps,
            certified_by: if result.x_star.is_some() {
                "distance-to-solution".into()
            } else {
                "natural-residual".into()
            },
            target_met: result.certified_eps <= result.epsilon,
            restarts: result.restarts,
            last_restart: result.last_restart,
            iters_run: result.iters_run,
            schedule: result.schedule.to_string(),
            experimental: result.experimental,
            note: result.experimental.then(|| EXPERIMENTAL_MARKER.to_string()),
            epsilon: result.epsilon,
            lambda: result.lambda,
            lambda_bound: result.lambda_bound,
            m_hat: result.m_hat,
            restart_radius: result.restart_radius,
            trace_path: trace_path.to_path_buf(),
        },
        oracle: cert.map(OracleSummary::from),
        config: cfg.clone(),
    }
}

/// Optional oracle, then one solve; writes the trace and the summary.
pub fn run(cfg: &RunConfig) -> Result<Summary, CliError> {
    let trace_path = cfg.trace_path();
    let summary_path = cfg.summary_path();
    ensure_writable(&trace_path, "output.trace_path")?;
    ensure_writable(&summary_path, "output.summary_path")?;
    let prepared = prepare(cfg)?;
    info!("solving {} (dim {})", prepared.problem.name, prepared.problem.dim());
    let result = solve_to_trace(cfg, &prepared.problem, &trace_path)?;
    let summary = summarize(cfg, &prepared.problem, &result, prepared.cert.as_ref(), &trace_path);
    std::fs::write(&summary_path, summary.to_toml())?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Theta0,
    Power,
    Ratio,
    /// Values are multiples of the penalty threshold `Lambda_eps`.
    Lambda,
    Epsilon,
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "theta0" => Ok(SweepParam::Theta0),
            "power" => Ok(SweepParam::Power),
            "ratio" => Ok(SweepParam::Ratio),
            "lambda" => Ok(SweepParam::Lambda),
            "epsilon" => Ok(SweepParam::Epsilon),
            _ => Err(format!("unknown sweep parameter `{s}` (theta0, power, ratio, lambda, epsilon)")),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Theta0 => "theta0",
            SweepParam::Power => "power",
            SweepParam::Ratio => "ratio",
            SweepParam::Lambda => "lambda",
            SweepParam::Epsilon => "epsilon",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub iters: usize,
    pub restarts: usize,
    pub certified_eps: f64,
    pub best_residual: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub target_met: bool,
    pub experimental: bool,
}

pub const SWEEP_HEADER: &str = "value,iters,restarts,certified_eps,best_residual,epsilon,lambda,target_met,experimental";

impl SweepRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.value,
            self.iters,
            self.restarts,
            self.certified_eps,
            self.best_residual,
            self.epsilon,
            self.lambda,
            self.target_met,
            self.experimental
        )
    }
}

fn with_param(base: &RunConfig, param: SweepParam, value: f64, lambda_bound: f64) -> Result<RunConfig, CliError> {
    let mut cfg = base.clone();
    let s = &mut cfg.solver;
    match (param, &mut s.schedule) {
        (SweepParam::Theta0, sched) => {
            *sched = sched.scaled(value / sched.theta0());
        }
        (SweepParam::Power, StepSchedule::Harmonic { power, .. }) => *power = value,
        (SweepParam::Ratio, StepSchedule::Geometric { ratio, .. }) => *ratio = value,
        (SweepParam::Power | SweepParam::Ratio, sched) => {
            return Err(CliError::Config(format!(
                "solver.schedule: `{param}` does not apply to {sched}"
            )));
        }
        (SweepParam::Lambda, _) => s.lambda = LambdaSetting::Fixed(value * lambda_bound),
        (SweepParam::Epsilon, _) => {
            s.epsilon = value;
            cfg.penalty.epsilon = None;
        }
    }
    Ok(cfg)
}

fn indexed_path(path: &Path, param: SweepParam, index: usize) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}-{param}-{index}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{param}-{index}"),
    };
    path.with_file_name(name)
}

/// Where the sweep table goes: next to the summary.
pub fn sweep_table_path(cfg: &RunConfig, param: SweepParam) -> PathBuf {
    let summary = cfg.summary_path();
    let stem = summary.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    summary.with_file_name(format!("{stem}-sweep-{param}.csv"))
}

/// One solve per value, run concurrently; each run writes its own trace.
pub fn sweep(base: &RunConfig, param: SweepParam, values: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    if values.is_empty() {
        return Err(CliError::Config("--values: at least one value is needed".into()));
    }
    let prepared = prepare(base)?;
    let lambda_bound = match param {
        SweepParam::Lambda => {
            let mut solver = base.solver_config(&prepared.problem)?;
            solver.lambda = LambdaChoice::Auto;
            resolve_lambda(&prepared.problem, &solver)?.lambda_bound
        }
        _ => 0.0,
    };
    let configs = values
        .iter()
        .map(|&v| {
            let cfg = with_param(base, param, v, lambda_bound)?;
            cfg.solver_config(&prepared.problem)?;
            cfg.penalty_method()?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let base_trace = base.trace_path();
    let paths: Vec<PathBuf> = (0..values.len()).map(|i| indexed_path(&base_trace, param, i)).collect();
    for p in &paths {
        ensure_writable(p, "output.trace_path")?;
    }
    let table_path = sweep_table_path(base, param);
    ensure_writable(&table_path, "output.summary_path")?;
    let results: Vec<Result<SolveResult64, CliError>> = configs
        .par_iter()
        .zip(paths.par_iter())
        .map(|(cfg, path)| solve_to_trace(cfg, &prepared.problem, path))
        .collect();
    let mut rows = Vec::with_capacity(values.len());
    for (value, r) in values.iter().zip(results) {
        let r = r?;
        rows.push(SweepRow {
            value: *value,
            iters: r.iters_run,
            restarts: r.restarts,
            certified_eps: r.certified_eps,
            best_residual: r.best_residual,
            epsilon: r.epsilon,
            lambda: r.lambda,
            target_met: r.certified_eps <= r.epsilon,
            experimental: r.experimental,
        });
    }
    let mut table = String::from(SWEEP_HEADER);
    table.push('\n');
    for row in &rows {
        table.push_str(&row.csv());
        table.push('\n');
    }
    std::fs::write(&table_path, table)?;
    Ok(rows)
}
