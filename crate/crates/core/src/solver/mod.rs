//! The penalized fixed-point iteration
//!
//! ```text
//! x_{k+1} = x_k - theta_k f_k   if ||x_k|| <= R,   x_0 otherwise,
//! ```
//!
//! with `f_k = F(x_k) + lambda P(x_k)` and `R` the restart radius.

mod diagnostics;
mod schedule;
mod trace;

use serde::{Deserialize, Serialize};

pub use diagnostics::{check_a1_a2, descent_check, A1A2Report, DescentReport, Verdict};
pub use schedule::{theta, StepSchedule};
pub use trace::{csv_header, csv_row, toml_float, CsvTraceWriter, NullSink, TextTraceWriter, TraceRecord, TraceSink};

use crate::cones::{PenaltyMethod, SharpPenalty};
use crate::error::{Result, ViError};
use crate::operators::{
    estimate_operator_bound, lambda_bound, natural_residual_from, IterationForm, PenalizedOperator, Problem,
};
use crate::{Scalar, Vector};
use schedule::ScheduleState;

/// Samples behind the automatic operator bound.
pub const BOUND_SAMPLES: usize = 10_000;
/// Factor applied to the penalty threshold when `lambda` is automatic.
pub const AUTO_LAMBDA_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaChoice<T> {
    Auto,
    Fixed(T),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    pub epsilon: T,
    pub lambda: LambdaChoice<T>,
    pub rho_f: T,
    /// Defaults to `2 rho_f`.
    pub restart_radius: Option<T>,
    pub schedule: StepSchedule<T>,
    pub max_iters: usize,
    pub x0: Vector<T>,
    pub trace_every: usize,
    pub seed: u64,
    pub form: IterationForm,
    /// Opt-in early exit once the natural residual reaches this value.
    pub stop_at_residual: Option<T>,
}

impl<T: Scalar> SolverConfig<T> {
    /// Harmonic `theta0 = 0.5, power = 1`, automatic lambda, `10^5` steps.
    pub fn new(epsilon: T, rho_f: T, x0: Vector<T>) -> Self {
        SolverConfig {
            epsilon,
            lambda: LambdaChoice::Auto,
            rho_f,
            restart_radius: None,
            schedule: StepSchedule::harmonic(T::lit(0.5), T::one()),
            max_iters: 100_000,
            x0,
            trace_every: 1,
            seed: 0,
            form: IterationForm::Penalized,
            stop_at_residual: None,
        }
    }

    pub fn restart_radius(&self) -> T {
        self.restart_radius.unwrap_or(T::lit(2.0) * self.rho_f)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.epsilon > T::zero()) || !self.epsilon.is_finite() {
            return Err(ViError::config("epsilon", "must be positive"));
        }
        if let LambdaChoice::Fixed(l) = self.lambda {
            if !(l > T::zero()) || !l.is_finite() {
                return Err(ViError::config("lambda", "must be positive or \"auto\""));
            }
        }
        if !(self.rho_f > T::zero()) || !self.rho_f.is_finite() {
            return Err(ViError::config("rho_f", "must be positive"));
        }
        if let Some(r) = self.restart_radius {
            if !(r >= self.rho_f) || !r.is_finite() {
                return Err(ViError::config("restart_radius", "must be at least rho_f"));
            }
        }
        self.schedule.validate()?;
        if self.max_iters == 0 {
            return Err(ViError::config("max_iters", "must be at least 1"));
        }
        if self.trace_every == 0 {
            return Err(ViError::config("trace_every", "must be at least 1"));
        }
        if self.x0.dim() != dim {
            return Err(ViError::config(
                "x0",
                format!("has dimension {}, problem has {dim}", self.x0.dim()),
            ));
        }
        if !(self.x0.norm() <= self.rho_f * (T::one() + T::epsilon())) {
            return Err(ViError::config(
                "x0",
                "the initial point must lie in rho_f B (||x0|| <= rho_f)",
            ));
        }
        if let Some(s) = self.stop_at_residual {
            if !(s >= T::zero()) {
                return Err(ViError::config("stop_at_residual", "must be nonnegative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult<T> {
    /// Iterate with the smallest natural residual.
    pub best: Vector<T>,
    pub best_iter: usize,
    pub best_residual: T,
    pub restarts: usize,
    pub last_restart: Option<usize>,
    pub iters_run: usize,
    pub trace: Vec<TraceRecord<T>>,
    /// `||best - x*||` when `x*` is known, else the best residual.
    pub certified_eps: T,
    pub lambda: T,
    pub lambda_bound: T,
    pub m_hat: T,
    pub epsilon: T,
    pub restart_radius: T,
    pub x_star: Option<Vector<T>>,
    pub schedule: StepSchedule<T>,
    pub experimental: bool,
}

/// Marker attached to results of schedules without a convergence guarantee.
pub const EXPERIMENTAL_MARKER: &str = "experimental: convergence not guaranteed";

/// One update. Returns `(x0, true)` when `x` lies outside the restart ball,
/// else `(x - theta f(x), false)`.
pub fn step<T: Scalar>(
    x: &Vector<T>,
    op: &PenalizedOperator<T>,
    theta: T,
    cfg: &SolverConfig<T>,
) -> Result<(Vector<T>, bool)> {
    if !(theta > T::zero()) {
        return Err(ViError::NonPositiveArgument {
            name: "theta",
            value: theta.to_f64_lossy(),
        });
    }
    if x.norm() > cfg.restart_radius() {
        return Ok((cfg.x0.clone(), true));
    }
    let f = op.evaluate(x)?.value;
    let next = x.add_scaled(-theta, &f);
    if !next.is_finite() {
        return Err(ViError::NonFiniteIterate { iteration: 0 });
    }
    Ok((next, false))
}

/// Penalty level and the estimates behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaInfo<T> {
    pub lambda: T,
    pub lambda_bound: T,
    pub m_hat: T,
}

pub fn resolve_lambda<T: Scalar>(problem: &Problem<T>, cfg: &SolverConfig<T>) -> Result<LambdaInfo<T>> {
    let m_hat = estimate_operator_bound(&problem.operator, cfg.rho_f, BOUND_SAMPLES)?;
    let bound = if m_hat > T::zero() {
        Some(lambda_bound(cfg.rho_f, m_hat, cfg.epsilon)?)
    } else {
        None
    };
    let lambda = match (cfg.lambda, bound) {
        (LambdaChoice::Fixed(l), _) => l,
        (LambdaChoice::Auto, Some(b)) => T::lit(AUTO_LAMBDA_FACTOR) * b,
        (LambdaChoice::Auto, None) => {
            return Err(ViError::config(
                "lambda",
                "auto: F vanishes on the sampled rho_f ball; give lambda explicitly",
            ))
        }
    };
    Ok(LambdaInfo {
        lambda,
        lambda_bound: bound.unwrap_or(T::zero()),
        m_hat,
    })
}

pub fn solve<T: Scalar>(problem: &Problem<T>, cfg: &SolverConfig<T>, method: PenaltyMethod<T>) -> Result<SolveResult<T>> {
    solve_with_sink(problem, cfg, method, &mut NullSink)
}

pub fn solve_with_sink<T: Scalar>(
    problem: &Problem<T>,
    cfg: &SolverConfig<T>,
    method: PenaltyMethod<T>,
    sink: &mut dyn TraceSink<T>,
) -> Result<SolveResult<T>> {
    cfg.validate(problem.dim())?;
    if let Some(bound) = problem.set.norm_bound() {
        if bound > cfg.rho_f {
            return Err(ViError::config("rho_f", "the feasible set must lie inside rho_f B"));
        }
    }
    let info = resolve_lambda(problem, cfg)?;
    let mut op = PenalizedOperator::new(problem.operator.clone(), problem.set.clone(), method, info.lambda)?
        .with_form(cfg.form);
    op.penalty = SharpPenalty::with_seed(problem.set.clone(), method, cfg.seed);
    run(problem, cfg, &op, info, sink)
}

fn run<T: Scalar>(
    problem: &Problem<T>,
    cfg: &SolverConfig<T>,
    op: &PenalizedOperator<T>,
    info: LambdaInfo<T>,
    sink: &mut dyn TraceSink<T>,
) -> Result<SolveResult<T>> {
    let experimental = cfg.schedule.experimental();
    if experimental {
        log::warn!("{EXPERIMENTAL_MARKER} ({})", cfg.schedule);
    }
    let step_scale = match cfg.form {
        IterationForm::Penalized => T::one(),
        IterationForm::Superiorized => info.lambda,
    };
    let radius = cfg.restart_radius();
    let x_star = problem.known_solution().cloned();
    let mut state = ScheduleState::new();
    let mut x = cfg.x0.clone();
    let mut trace = Vec::new();
    let mut best = (x.clone(), 0usize, T::infinity());
    let mut restarts = 0;
    let mut last_restart = None;
    let mut iters_run = 0;

    for k in 0..cfg.max_iters {
        let value = op.evaluate(&x)?;
        let residual = natural_residual_from(&problem.set, &x, &value.base)?;
        if residual < best.2 {
            best = (x.clone(), k, residual);
        }
        state.observe(&cfg.schedule, residual);
        let theta_k = cfg.schedule.theta_with(k, state.stalls) * step_scale;
        let restarted = x.norm() > radius;
        let done = cfg.stop_at_residual.is_some_and(|s| residual <= s);
        let final_iter = done || k + 1 == cfg.max_iters;
        if k % cfg.trace_every == 0 || restarted || final_iter {
            let record = TraceRecord {
                k,
                x: x.clone(),
                step: theta_k,
                f_norm: value.value.norm(),
                zone: value.penalty.zone,
                residual,
                merit: x_star.as_ref().map(|s| x.distance_to(s).powi(2)),
                restarted,
            };
            sink.record(&record)?;
            if restarted {
                sink.flush()?;
            }
            trace.push(record);
        }
        iters_run = k + 1;
        if done {
            break;
        }
        if restarted {
            restarts += 1;
            last_restart = Some(k);
            x = cfg.x0.clone();
        } else {
            x = x.add_scaled(-theta_k, &value.value);
            if !x.is_finite() {
                sink.flush()?;
                return Err(ViError::NonFiniteIterate { iteration: k + 1 });
            }
        }
    }
    sink.flush()?;

    let (best, best_iter, best_residual) = best;
    let certified_eps = match &x_star {
        Some(s) => best.distance_to(s),
        None => best_residual,
    };
    Ok(SolveResult {
        best,
        best_iter,
        best_residual,
        restarts,
        last_restart,
        iters_run,
        trace,
        certified_eps,
        lambda: info.lambda,
        lambda_bound: info.lambda_bound,
        m_hat: info.m_hat,
        epsilon: cfg.epsilon,
        restart_radius: radius,
        x_star,
        schedule: cfg.schedule,
        experimental,
    })
}
