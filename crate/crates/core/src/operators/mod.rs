//! Variational inequality operators, the penalized operator
//! `F_lambda = F + lambda P` and the sampling estimators built on them.

mod catalog;
mod field;

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use catalog::{affine_problem, builtin_problem, fn_problem, qp_grad_problem, Problem, CATALOG};
pub use field::{AffineField, FnField, OscillatingField, VectorField};

use crate::cones::{PenaltyMethod, PenaltyValue, SharpPenalty};
use crate::error::{Result, ViError};
use crate::geometry::{uniform_in_ball, ConvexSet};
use crate::{quasi, Scalar, Vector};

/// Safety factor applied to the sampled maximum of `||F||`.
pub const BOUND_SAFETY_FACTOR: f64 = 1.5;

/// Anything that maps points to vectors of the same dimension.
pub trait Operator<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &Vector<T>) -> Result<Vector<T>>;
}

/// A single-valued VI operator with the metadata the solver needs.
#[derive(Clone)]
pub struct ViOperator<T: Scalar> {
    field: Arc<dyn VectorField<T>>,
    pub name: String,
    /// Claimed monotonicity, audited by [`monotonicity_gap`].
    pub monotone: bool,
    /// Radius of long-range orientation.
    pub rho_f: T,
    /// Long-range orientation constant; diagnostic only.
    pub kappa: Option<T>,
    pub known_solution: Option<Vector<T>>,
}

impl<T: Scalar> fmt::Debug for ViOperator<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ViOperator")
            .field("name", &self.name)
            .field("dim", &self.field.dim())
            .field("monotone", &self.monotone)
            .field("rho_f", &self.rho_f)
            .field("known_solution", &self.known_solution.as_ref().map(|v| v.as_slice()))
            .finish()
    }
}

impl<T: Scalar> ViOperator<T> {
    pub fn new(name: impl Into<String>, field: Arc<dyn VectorField<T>>, monotone: bool, rho_f: T) -> Result<Self> {
        if !(rho_f > T::zero()) {
            return Err(ViError::NonPositiveArgument {
                name: "rho_f",
                value: rho_f.to_f64_lossy(),
            });
        }
        Ok(ViOperator {
            field,
            name: name.into(),
            monotone,
            rho_f,
            kappa: None,
            known_solution: None,
        })
    }

    pub fn with_solution(mut self, x_star: Vector<T>) -> Self {
        self.known_solution = Some(x_star);
        self
    }

    pub fn with_kappa(mut self, kappa: T) -> Self {
        self.kappa = Some(kappa);
        self
    }

    pub fn field(&self) -> &Arc<dyn VectorField<T>> {
        &self.field
    }

    pub fn eval(&self, x: &Vector<T>) -> Result<Vector<T>> {
        x.ensure_dim(self.field.dim())?;
        let v = self.field.eval(x);
        if v.dim() != x.dim() || !v.is_finite() {
            return Err(ViError::NonFiniteOperatorValue);
        }
        Ok(v)
    }
}

impl<T: Scalar> Operator<T> for ViOperator<T> {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn apply(&self, x: &Vector<T>) -> Result<Vector<T>> {
        self.eval(x)
    }
}

/// Which algebraic form of the penalized step is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IterationForm {
    /// `F(x) + lambda p(x)`.
    #[default]
    Penalized,
    /// `p(x) + F(x) / lambda`: the feasibility step perturbed by the scaled operator.
    Superiorized,
}

/// Result of one evaluation of the penalized operator.
#[derive(Debug, Clone)]
pub struct PenalizedValue<T> {
    pub value: Vector<T>,
    /// The unpenalized `F(x)`.
    pub base: Vector<T>,
    pub penalty: PenaltyValue<T>,
}

#[derive(Debug, Clone)]
pub struct PenalizedOperator<T: Scalar> {
    pub base: ViOperator<T>,
    pub penalty: SharpPenalty<T>,
    pub lambda: T,
    pub form: IterationForm,
}

impl<T: Scalar> PenalizedOperator<T> {
    pub fn new(base: ViOperator<T>, set: ConvexSet<T>, method: PenaltyMethod<T>, lambda: T) -> Result<Self> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(ViError::NonPositiveArgument {
                name: "lambda",
                value: lambda.to_f64_lossy(),
            });
        }
        if base.dim() != set.dim() {
            return Err(ViError::DimensionMismatch {
                expected: base.dim(),
                got: set.dim(),
            });
        }
        Ok(PenalizedOperator {
            base,
            penalty: SharpPenalty::new(set, method),
            lambda,
            form: IterationForm::Penalized,
        })
    }

    pub fn with_form(mut self, form: IterationForm) -> Self {
        self.form = form;
        self
    }

    pub fn set(&self) -> &ConvexSet<T> {
        self.penalty.set()
    }

    pub fn evaluate(&self, x: &Vector<T>) -> Result<PenalizedValue<T>> {
        let base = self.base.eval(x)?;
        let penalty = self.penalty.evaluate(x)?;
        let value = match self.form {
            IterationForm::Penalized => base.add_scaled(self.lambda, &penalty.direction),
            IterationForm::Superiorized => penalty.direction.add_scaled(T::one() / self.lambda, &base),
        };
        Ok(PenalizedValue { value, base, penalty })
    }
}

impl<T: Scalar> Operator<T> for PenalizedOperator<T> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn apply(&self, x: &Vector<T>) -> Result<Vector<T>> {
        Ok(self.evaluate(x)?.value)
    }
}

/// `F(x) + lambda P(x)`; inside the set this is exactly `F(x)`.
pub fn eval_penalized<T: Scalar>(op: &PenalizedOperator<T>, x: &Vector<T>) -> Result<Vector<T>> {
    op.apply(x)
}

/// Natural residual `||x - P_X(x - F(x))||`, zero exactly at solutions.
pub fn natural_residual<T: Scalar>(op: &ViOperator<T>, set: &ConvexSet<T>, x: &Vector<T>) -> Result<T> {
    let fx = op.eval(x)?;
    natural_residual_from(set, x, &fx)
}

/// [`natural_residual`] with `F(x)` already evaluated.
pub fn natural_residual_from<T: Scalar>(set: &ConvexSet<T>, x: &Vector<T>, fx: &Vector<T>) -> Result<T> {
    Ok(x.distance_to(&set.project(&(x - fx))?))
}

/// `1.5 * max ||F(x)||` over `samples` quasi-random points of `radius * B`.
pub fn estimate_operator_bound<T: Scalar, O: Operator<T> + ?Sized>(op: &O, radius: T, samples: usize) -> Result<T> {
    estimate_operator_bound_with(op, radius, samples, T::lit(BOUND_SAFETY_FACTOR))
}

pub fn estimate_operator_bound_with<T: Scalar, O: Operator<T> + ?Sized>(
    op: &O,
    radius: T,
    samples: usize,
    safety_factor: T,
) -> Result<T> {
    if samples == 0 {
        return Err(ViError::NonPositiveArgument {
            name: "samples",
            value: 0.0,
        });
    }
    let mut max = T::zero();
    for x in quasi::ball_points(op.dim(), radius, samples) {
        let v = op.apply(&x)?;
        if !v.is_finite() {
            return Err(ViError::NonFiniteOperatorValue);
        }
        max = max.max(v.norm());
    }
    Ok(safety_factor * max)
}

/// Penalty threshold `rho_F M / eps`.
pub fn lambda_bound<T: Scalar>(rho_f: T, m_bound: T, eps: T) -> Result<T> {
    for (name, value) in [("rho_f", rho_f), ("m_bound", m_bound), ("eps", eps)] {
        if !(value > T::zero()) {
            return Err(ViError::NonPositiveArgument {
                name,
                value: value.to_f64_lossy(),
            });
        }
    }
    Ok(rho_f * m_bound / eps)
}

/// Where and how an empirical orientation margin was attained.
#[derive(Debug, Clone)]
pub struct OrientationReport<T> {
    pub margin: T,
    pub argmin: Vector<T>,
    pub evaluated: usize,
}

/// Empirical `min f(x).(x - target)` over points of `region_radius * B`
/// outside `target + eps B`. Positive values certify strong orientation
/// on the sample.
pub fn orientation_margin<T: Scalar, O: Operator<T> + ?Sized>(
    op: &O,
    target: &Vector<T>,
    region_radius: T,
    eps: T,
    samples: usize,
) -> Result<T> {
    Ok(orientation_report(op, target, region_radius, eps, samples, |_| true)?.margin)
}

/// [`orientation_margin`] restricted to sample points accepted by `keep`.
pub fn orientation_report<T: Scalar, O: Operator<T> + ?Sized>(
    op: &O,
    target: &Vector<T>,
    region_radius: T,
    eps: T,
    samples: usize,
    keep: impl Fn(&Vector<T>) -> bool,
) -> Result<OrientationReport<T>> {
    target.ensure_dim(op.dim())?;
    let mut best: Option<(T, Vector<T>)> = None;
    let mut evaluated = 0;
    for x in quasi::shell_points(target, eps, region_radius, samples) {
        if !keep(&x) {
            continue;
        }
        let m = op.apply(&x)?.dot(&(&x - target));
        evaluated += 1;
        if best.as_ref().is_none_or(|(b, _)| m < *b) {
            best = Some((m, x));
        }
    }
    let (margin, argmin) = best.ok_or(ViError::EmptyRegion)?;
    Ok(OrientationReport {
        margin,
        argmin,
        evaluated,
    })
}

/// `min (F(x) - F(y)).(x - y)` over random pairs in `radius * B`;
/// negative values witness non-monotonicity.
pub fn monotonicity_gap<T: Scalar, O: Operator<T> + ?Sized>(op: &O, radius: T, samples: usize, seed: u64) -> Result<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = T::infinity();
    for _ in 0..samples {
        let x = uniform_in_ball::<T, _>(&mut rng, op.dim()).scale(radius);
        let y = uniform_in_ball::<T, _>(&mut rng, op.dim()).scale(radius);
        let gap = (&op.apply(&x)? - &op.apply(&y)?).dot(&(&x - &y));
        worst = worst.min(gap);
    }
    Ok(worst)
}

/// Largest sampled difference quotient `||F(x) - F(y)|| / ||x - y||` over pairs of points of `set`.
pub fn estimate_lipschitz<T: Scalar, O: Operator<T> + ?Sized>(
    op: &O,
    set: &ConvexSet<T>,
    samples: usize,
    seed: u64,
) -> Result<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = set.sample(&mut rng, samples.max(2))?;
    let mut best = T::zero();
    let h = T::lit(1e-3);
    for (i, x) in pts.iter().enumerate() {
        let y = &pts[(i * 7 + 1) % pts.len()];
        let pairs = [
            (x.clone(), y.clone()),
            (x.clone(), x.add_scaled(h, &Vector::basis(x.dim(), i % x.dim()))),
        ];
        for (a, b) in pairs {
            let d = a.distance_to(&b);
            if d > T::zero() {
                best = best.max((&op.apply(&a)? - &op.apply(&b)?).norm() / d);
            }
        }
    }
    Ok(best)
}

/// Sampled `min F(x).(x - y) - kappa ||x - y||` over `x` at set distance in
/// `[rho_F, 2 rho_F]` and `y` in the set. `None` without a `kappa`.
pub fn long_range_margin<T: Scalar>(
    op: &ViOperator<T>,
    set: &ConvexSet<T>,
    samples: usize,
    seed: u64,
) -> Result<Option<T>> {
    let Some(kappa) = op.kappa else {
        return Ok(None);
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchors = set.sample(&mut rng, samples)?;
    let mut worst = T::infinity();
    for y in &anchors {
        let dir = crate::geometry::uniform_on_sphere::<T, _>(&mut rng, set.dim());
        let p = set.project(&y.add_scaled(T::lit(1e6), &dir))?;
        let x = p.add_scaled(op.rho_f * T::lit(1.5), &dir);
        if set.distance(&x)? < op.rho_f {
            continue;
        }
        let v = op.eval(&x)?.dot(&(&x - y)) - kappa * x.distance_to(y);
        worst = worst.min(v);
    }
    Ok(Some(worst))
}
