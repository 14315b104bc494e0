use serde::Serialize;

use super::{SolveResult, TraceRecord};
use crate::error::{Result, ViError};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// Nothing to check.
    Vacuous,
    /// `x*` is not known.
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct A1A2Report<T> {
    pub max_norm: T,
    /// `R + theta_max * max ||f||` over records after the last restart.
    pub a1_bound: T,
    pub a1: Verdict,
    pub a2: Verdict,
    /// Trace segments outside `x* + eps B` that were examined for A2.
    pub a2_segments: usize,
    pub restarts: usize,
    pub last_restart: Option<usize>,
}

/// Boundedness (A1) and merit-descent (A2 proxy) diagnostics on a trace.
///
/// A1 fails when an iterate beyond the restart radius was not restarted, or
/// when an iterate after the last restart lies outside
/// `R + theta_max * max ||f||`. The A2 proxy splits the part of the trace
/// after the last restart into maximal runs of records outside `x* + eps B`
/// and requires the merit to drop below its value at the start of each run,
/// counting the first record after the run.
pub fn check_a1_a2<T: Scalar>(result: &SolveResult<T>) -> Result<A1A2Report<T>> {
    let trace = &result.trace;
    if trace.is_empty() {
        return Err(ViError::EmptyTrace);
    }
    let r = result.restart_radius;
    let max_norm = trace.iter().map(|t| t.x.norm()).fold(T::zero(), T::max);
    let start = trace.iter().rposition(|t| t.restarted).map_or(0, |i| i + 1);
    let tail = &trace[start..];
    let theta_max = tail.iter().map(|t| t.step).fold(T::zero(), T::max);
    let f_max = tail.iter().map(|t| t.f_norm).fold(T::zero(), T::max);
    let a1_bound = r + theta_max * f_max;
    let unrestarted_escape = trace.iter().any(|t| !t.restarted && t.x.norm() > r);
    let a1 = if unrestarted_escape || tail.iter().any(|t| t.x.norm() > a1_bound) {
        Verdict::Fail
    } else {
        Verdict::Pass
    };
    let (a2, a2_segments) = match result.x_star {
        None => (Verdict::Unknown, 0),
        Some(_) => a2_proxy(tail, result.epsilon),
    };
    Ok(A1A2Report {
        max_norm,
        a1_bound,
        a1,
        a2,
        a2_segments,
        restarts: result.restarts,
        last_restart: result.last_restart,
    })
}

fn a2_proxy<T: Scalar>(tail: &[TraceRecord<T>], eps: T) -> (Verdict, usize) {
    let eps2 = eps * eps;
    let outside = |t: &TraceRecord<T>| t.merit.is_some_and(|m| m > eps2);
    let mut segments = 0;
    let mut i = 0;
    while i < tail.len() {
        if !outside(&tail[i]) {
            i += 1;
            continue;
        }
        let begin = i;
        while i < tail.len() && outside(&tail[i]) {
            i += 1;
        }
        // Include the record that ends the run, when there is one.
        let end = (i + 1).min(tail.len());
        if end - begin < 2 {
            continue;
        }
        segments += 1;
        let w0 = tail[begin].merit.unwrap_or(T::zero());
        let min_after = tail[begin + 1..end]
            .iter()
            .filter_map(|t| t.merit)
            .fold(T::infinity(), T::min);
        if !(min_after < w0) {
            return (Verdict::Fail, segments);
        }
    }
    if segments == 0 {
        (Verdict::Vacuous, 0)
    } else {
        (Verdict::Pass, segments)
    }
}

/// Outcome of the one-step descent test `W(x_{k+1}) < W(x_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DescentReport<T> {
    pub delta_hat: T,
    /// `max ||f_k||` over traced steps inside the restart ball.
    pub c_hat: T,
    /// Steps with `theta_k < delta / C^2`.
    pub checked_global: usize,
    pub violations_global: usize,
    /// Steps with `theta_k < delta / ||f_k||^2`.
    pub checked_local: usize,
    pub violations_local: usize,
}

/// Checks descent of `||x - x*||^2` on consecutive traced steps that start
/// outside `x* + eps B` and inside the restart ball, for steps small
/// relative to the orientation margin `delta_hat`. Needs a trace recorded at
/// every step and a known `x*`.
pub fn descent_check<T: Scalar>(result: &SolveResult<T>, delta_hat: T) -> Result<DescentReport<T>> {
    if result.trace.is_empty() {
        return Err(ViError::EmptyTrace);
    }
    if result.x_star.is_none() {
        return Err(ViError::config("known_solution", "descent check needs x*"));
    }
    let r = result.restart_radius;
    let eps2 = result.epsilon * result.epsilon;
    let inside_ball = |t: &TraceRecord<T>| !t.restarted && t.x.norm() <= r;
    let c_hat = result
        .trace
        .iter()
        .filter(|t| inside_ball(t))
        .map(|t| t.f_norm)
        .fold(T::zero(), T::max);
    let mut report = DescentReport {
        delta_hat,
        c_hat,
        checked_global: 0,
        violations_global: 0,
        checked_local: 0,
        violations_local: 0,
    };
    for pair in result.trace.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if b.k != a.k + 1 || !inside_ball(a) {
            continue;
        }
        let (Some(wa), Some(wb)) = (a.merit, b.merit) else {
            continue;
        };
        if !(wa > eps2) {
            continue;
        }
        let descended = wb < wa;
        if c_hat > T::zero() && a.step < delta_hat / (c_hat * c_hat) {
            report.checked_global += 1;
            if !descended {
                report.violations_global += 1;
            }
        }
        if a.f_norm > T::zero() && a.step < delta_hat / (a.f_norm * a.f_norm) {
            report.checked_local += 1;
            if !descended {
                report.violations_local += 1;
            }
        }
    }
    Ok(report)
}
