use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ViError};
use crate::Scalar;

/// Step multipliers `theta_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepSchedule<T> {
    /// `theta0 / (k + 1)^power`, `power` in `(0.5, 1]`.
    Harmonic { theta0: T, power: T },
    /// `theta0 * ratio^k`, summable.
    Geometric { theta0: T, ratio: T },
    /// `theta0 * shrink^s` where `s` counts completed windows of `window`
    /// iterations in which the best residual did not improve.
    AdaptiveLeastNorm { theta0: T, shrink: T, window: usize },
}

impl<T: Scalar> StepSchedule<T> {
    pub fn harmonic(theta0: T, power: T) -> Self {
        StepSchedule::Harmonic { theta0, power }
    }

    pub fn theta0(&self) -> T {
        match *self {
            StepSchedule::Harmonic { theta0, .. }
            | StepSchedule::Geometric { theta0, .. }
            | StepSchedule::AdaptiveLeastNorm { theta0, .. } => theta0,
        }
    }

    /// Same schedule with every step multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        let mut out = *self;
        match &mut out {
            StepSchedule::Harmonic { theta0, .. }
            | StepSchedule::Geometric { theta0, .. }
            | StepSchedule::AdaptiveLeastNorm { theta0, .. } => *theta0 = *theta0 * factor,
        }
        out
    }

    /// Schedules whose steps may be summable, so the iteration carries no
    /// convergence guarantee.
    pub fn experimental(&self) -> bool {
        !matches!(self, StepSchedule::Harmonic { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta0() > T::zero()) || !self.theta0().is_finite() {
            return Err(ViError::config("schedule.theta0", "must be positive and finite"));
        }
        match *self {
            StepSchedule::Harmonic { power, .. } => {
                if !(power > T::lit(0.5) && power <= T::one()) {
                    return Err(ViError::config("schedule.power", "must lie in (0.5, 1]"));
                }
            }
            StepSchedule::Geometric { ratio, .. } => {
                if !(ratio > T::zero() && ratio < T::one()) {
                    return Err(ViError::config("schedule.ratio", "must lie in (0, 1)"));
                }
            }
            StepSchedule::AdaptiveLeastNorm { shrink, window, .. } => {
                if !(shrink > T::zero() && shrink < T::one()) {
                    return Err(ViError::config("schedule.shrink", "must lie in (0, 1)"));
                }
                if window == 0 {
                    return Err(ViError::config("schedule.window", "must be at least 1"));
                }
            }
        }
        Ok(())
    }

    /// `theta_k` given the number of stalled windows so far.
    pub fn theta_with(&self, k: usize, stalls: usize) -> T {
        match *self {
            StepSchedule::Harmonic { theta0, power } => theta0 / T::from_usize_lossy(k + 1).powf(power),
            StepSchedule::Geometric { theta0, ratio } => theta0 * ratio.powi(k.min(i32::MAX as usize) as i32),
            StepSchedule::AdaptiveLeastNorm { theta0, shrink, .. } => {
                theta0 * shrink.powi(stalls.min(i32::MAX as usize) as i32)
            }
        }
    }
}

impl<T: Scalar> fmt::Display for StepSchedule<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepSchedule::Harmonic { theta0, power } => write!(f, "harmonic(theta0={theta0}, power={power})"),
            StepSchedule::Geometric { theta0, ratio } => write!(f, "geometric(theta0={theta0}, ratio={ratio})"),
            StepSchedule::AdaptiveLeastNorm { theta0, shrink, window } => {
                write!(f, "adaptive-least-norm(theta0={theta0}, shrink={shrink}, window={window})")
            }
        }
    }
}

/// `theta_k` for a schedule with no stalled windows.
pub fn theta<T: Scalar>(schedule: &StepSchedule<T>, k: usize) -> T {
    schedule.theta_with(k, 0)
}

/// Window bookkeeping for [`StepSchedule::AdaptiveLeastNorm`].
#[derive(Debug, Clone)]
pub(crate) struct ScheduleState<T> {
    best: T,
    window_best: T,
    seen: usize,
    pub stalls: usize,
}

impl<T: Scalar> ScheduleState<T> {
    pub fn new() -> Self {
        ScheduleState {
            best: T::infinity(),
            window_best: T::infinity(),
            seen: 0,
            stalls: 0,
        }
    }

    pub fn observe(&mut self, schedule: &StepSchedule<T>, residual: T) {
        let StepSchedule::AdaptiveLeastNorm { window, .. } = *schedule else {
            return;
        };
        self.window_best = self.window_best.min(residual);
        self.seen += 1;
        if self.seen == window {
            if !(self.window_best < self.best) {
                self.stalls += 1;
            }
            self.best = self.best.min(self.window_best);
            self.window_best = T::infinity();
            self.seen = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_examples() {
        assert_eq!(theta(&StepSchedule::harmonic(1.0, 1.0), 3), 0.25);
        assert_eq!(theta(&StepSchedule::Geometric { theta0: 1.0, ratio: 0.5 }, 4), 0.0625);
        assert_eq!(theta(&StepSchedule::harmonic(2.0, 0.75), 0), 2.0);
    }

    #[test]
    fn validation() {
        assert!(StepSchedule::harmonic(1.0, 0.5).validate().is_err());
        assert!(StepSchedule::harmonic(1.0, 1.0).validate().is_ok());
        assert!(StepSchedule::harmonic(0.0, 1.0).validate().is_err());
        assert!(StepSchedule::Geometric { theta0: 1.0, ratio: 1.0 }.validate().is_err());
        assert!(StepSchedule::AdaptiveLeastNorm { theta0: 1.0, shrink: 0.5, window: 0 }
            .validate()
            .is_err());
    }

    #[test]
    fn experimental_flags() {
        assert!(!StepSchedule::harmonic(1.0, 1.0).experimental());
        assert!(StepSchedule::Geometric { theta0: 1.0, ratio: 0.9 }.experimental());
    }

    #[test]
    fn adaptive_shrinks_on_stall() {
        let s = StepSchedule::AdaptiveLeastNorm { theta0: 1.0, shrink: 0.5, window: 2 };
        let mut st = ScheduleState::new();
        for r in [1.0, 0.5, 0.7, 0.6] {
            st.observe(&s, r);
        }
        assert_eq!(st.stalls, 1);
        assert_eq!(s.theta_with(10, st.stalls), 0.5);
    }

    #[test]
    fn scaled_multiplies_theta0() {
        let s = StepSchedule::harmonic(0.5, 1.0).scaled(4.0);
        assert_eq!(theta(&s, 1), 1.0);
    }
}
