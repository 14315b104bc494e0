//! Convex constraint functions `h` describing level sets `{x : h(x) <= 0}`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Result, ViError};
use crate::{Scalar, Vector};

/// A convex function together with a subgradient selection.
pub trait ConstraintFunction<T: Scalar>: Send + Sync {
    fn value(&self, x: &Vector<T>) -> T;

    /// Some element of the subdifferential at `x`. Must be finite.
    fn subgradient(&self, x: &Vector<T>) -> Vector<T>;

    /// Lipschitz constant of `h` near the set, when one is known.
    fn lipschitz_bound(&self) -> Option<T> {
        None
    }

    fn describe(&self) -> String {
        "constraint".to_string()
    }

    /// Euclidean projection onto `{h <= level}` when a direct method exists.
    fn project_sublevel(&self, _level: T, _x: &Vector<T>) -> Option<Result<Vector<T>>> {
        None
    }
}

/// `h(x) = ||x - center|| - radius`.
#[derive(Debug, Clone)]
pub struct NormConstraint<T> {
    pub center: Vector<T>,
    pub radius: T,
}

impl<T: Scalar> ConstraintFunction<T> for NormConstraint<T> {
    fn value(&self, x: &Vector<T>) -> T {
        x.distance_to(&self.center) - self.radius
    }

    fn subgradient(&self, x: &Vector<T>) -> Vector<T> {
        (x - &self.center)
            .normalized()
            .unwrap_or_else(|| Vector::zeros(x.dim()))
    }

    fn lipschitz_bound(&self) -> Option<T> {
        Some(T::one())
    }

    fn describe(&self) -> String {
        format!("norm(center={:?}, radius={})", self.center.as_slice(), self.radius)
    }

    fn project_sublevel(&self, level: T, x: &Vector<T>) -> Option<Result<Vector<T>>> {
        let r = self.radius + level;
        if r < T::zero() {
            return Some(Err(ViError::InvalidSet("empty sublevel set".into())));
        }
        let d = x.distance_to(&self.center);
        if d <= r {
            return Some(Ok(x.clone()));
        }
        Some(Ok(self.center.add_scaled(r / d, &(x - &self.center))))
    }
}

/// `h(x) = max_i |x_i - center_i| / half_width_i - 1`, a box written as a level set.
#[derive(Debug, Clone)]
pub struct MaxAbsConstraint<T> {
    pub center: Vector<T>,
    pub half_widths: Vector<T>,
}

impl<T: Scalar> MaxAbsConstraint<T> {
    fn argmax(&self, x: &Vector<T>) -> (usize, T) {
        let mut best = (0, T::neg_infinity());
        for i in 0..x.dim() {
            let v = (x[i] - self.center[i]).abs() / self.half_widths[i];
            if v > best.1 {
                best = (i, v);
            }
        }
        best
    }
}

impl<T: Scalar> ConstraintFunction<T> for MaxAbsConstraint<T> {
    fn value(&self, x: &Vector<T>) -> T {
        self.argmax(x).1 - T::one()
    }

    fn subgradient(&self, x: &Vector<T>) -> Vector<T> {
        let (i, _) = self.argmax(x);
        let mut g = Vector::zeros(x.dim());
        let d = x[i] - self.center[i];
        if !d.is_zero() {
            g[i] = d.signum() / self.half_widths[i];
        }
        g
    }

    fn lipschitz_bound(&self) -> Option<T> {
        let min_w = self
            .half_widths
            .iter()
            .fold(T::infinity(), |m, w| m.min(*w));
        Some(T::one() / min_w)
    }

    fn describe(&self) -> String {
        format!(
            "max-abs(center={:?}, half_widths={:?})",
            self.center.as_slice(),
            self.half_widths.as_slice()
        )
    }

    fn project_sublevel(&self, level: T, x: &Vector<T>) -> Option<Result<Vector<T>>> {
        let scale = T::one() + level;
        if scale < T::zero() {
            return Some(Err(ViError::InvalidSet("empty sublevel set".into())));
        }
        let mut y = x.clone();
        for i in 0..y.dim() {
            let w = scale * self.half_widths[i];
            y[i] = y[i].max(self.center[i] - w).min(self.center[i] + w);
        }
        Some(Ok(y))
    }
}

/// `h(x) = x'Qx + q'x + c` with `Q` symmetric positive semidefinite (row-major).
#[derive(Debug, Clone)]
pub struct QuadraticConstraint<T> {
    pub matrix: Vec<Vec<T>>,
    pub linear: Vector<T>,
    pub constant: T,
    pub lipschitz: Option<T>,
}

impl<T: Scalar> QuadraticConstraint<T> {
    fn mat_vec(&self, x: &Vector<T>) -> Vec<T> {
        self.matrix
            .iter()
            .map(|row| row.iter().zip(x.iter()).map(|(a, b)| *a * *b).sum())
            .collect()
    }
}

impl<T: Scalar> ConstraintFunction<T> for QuadraticConstraint<T> {
    fn value(&self, x: &Vector<T>) -> T {
        let qx = self.mat_vec(x);
        let quad: T = qx.iter().zip(x.iter()).map(|(a, b)| *a * *b).sum();
        quad + self.linear.dot(x) + self.constant
    }

    fn subgradient(&self, x: &Vector<T>) -> Vector<T> {
        let two = T::lit(2.0);
        let qx = self.mat_vec(x);
        Vector::raw(
            qx.iter()
                .zip(self.linear.iter())
                .map(|(a, b)| two * *a + *b)
                .collect(),
        )
    }

    fn lipschitz_bound(&self) -> Option<T> {
        self.lipschitz
    }

    fn describe(&self) -> String {
        "quadratic".to_string()
    }

    fn project_sublevel(&self, level: T, x: &Vector<T>) -> Option<Result<Vector<T>>> {
        Some(self.project_by_multiplier(level, x))
    }
}

impl<T: Scalar> QuadraticConstraint<T> {
    /// `y(mu) = (I + 2 mu Q)^{-1} (x - mu q)` minimizes `||y - x||^2 / 2 + mu h(y)`
    /// and `phi(mu) = h(y(mu)) - level` is nonincreasing with
    /// `phi'(mu) = -g' (I + 2 mu Q)^{-1} g`, `g = grad h(y(mu))`. The root is
    /// found by Newton steps kept inside a bracket, falling back to bisection.
    fn project_by_multiplier(&self, level: T, x: &Vector<T>) -> Result<Vector<T>> {
        if self.value(x) <= level {
            return Ok(x.clone());
        }
        let n = x.dim();
        let two = T::lit(2.0);
        // (y, phi, phi')
        let at = |mu: T| -> Result<(Vector<T>, T, T)> {
            let mut a: Vec<Vec<T>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            let q = T::lit(0.5) * (self.matrix[i][j] + self.matrix[j][i]);
                            two * mu * q + if i == j { T::one() } else { T::zero() }
                        })
                        .collect()
                })
                .collect();
            cholesky(&mut a)?;
            let mut y: Vec<T> = (0..n).map(|i| x[i] - mu * self.linear[i]).collect();
            cholesky_solve(&a, &mut y);
            let y = Vector::raw(y);
            let g = self.subgradient(&y);
            let mut w = g.as_slice().to_vec();
            cholesky_solve(&a, &mut w);
            let slope = -g.iter().zip(&w).map(|(u, v)| *u * *v).sum::<T>();
            Ok((y.clone(), self.value(&y) - level, slope))
        };
        let (mut lo, mut hi) = (T::zero(), T::infinity());
        let mut y_hi = None;
        let (mut mu, mut cur) = (T::zero(), at(T::zero())?);
        for _ in 0..500 {
            let (y, phi, slope) = cur;
            if phi > T::zero() {
                lo = mu;
            } else {
                hi = mu;
                y_hi = Some(y);
            }
            let newton = if slope < T::zero() { mu - phi / slope } else { T::nan() };
            let next = if newton > lo && newton < hi {
                newton
            } else if hi.is_finite() {
                T::lit(0.5) * (lo + hi)
            } else {
                (two * mu).max(T::one())
            };
            let settled = hi.is_finite() && !(next > lo && next < hi);
            let close = (next - mu).abs() <= T::epsilon() * mu.abs() && y_hi.is_some();
            if settled || close {
                break;
            }
            if !next.is_finite() {
                return Err(ViError::InvalidSet("empty sublevel set".into()));
            }
            mu = next;
            cur = at(mu)?;
        }
        // Make sure the returned point is on the feasible side.
        let mut up = if hi.is_finite() { hi } else { mu };
        let mut step = T::epsilon() * up.max(T::epsilon());
        let mut guard = 0;
        while y_hi.is_none() {
            up = up + step;
            step = step * two;
            let (y, phi, _) = at(up)?;
            if phi <= T::zero() {
                y_hi = Some(y);
            }
            guard += 1;
            if guard > 2000 || !up.is_finite() {
                return Err(ViError::InvalidSet("empty sublevel set".into()));
            }
        }
        Ok(y_hi.expect("feasible point"))
    }
}

/// In-place lower Cholesky factor of a symmetric positive definite matrix.
fn cholesky<T: Scalar>(a: &mut [Vec<T>]) -> Result<()> {
    let n = a.len();
    for j in 0..n {
        let d = a[j][..j].iter().fold(a[j][j], |d, &v| d - v * v);
        if !(d > T::zero()) {
            return Err(ViError::InvalidSet("quadratic constraint matrix is not positive semidefinite".into()));
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in j + 1..n {
            let s = (0..j).fold(a[i][j], |s, k| s - a[i][k] * a[j][k]);
            a[i][j] = s / d;
        }
    }
    Ok(())
}

fn cholesky_solve<T: Scalar>(l: &[Vec<T>], b: &mut [T]) {
    let n = b.len();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i][k] * b[k];
        }
        b[i] = s / l[i][i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s = s - l[k][i] * b[k];
        }
        b[i] = s / l[i][i];
    }
}

type ValueFn<T> = dyn Fn(&Vector<T>) -> T + Send + Sync;
type GradFn<T> = dyn Fn(&Vector<T>) -> Vector<T> + Send + Sync;

/// Closure-backed constraint.
#[derive(Clone)]
pub struct FnConstraint<T> {
    value: Arc<ValueFn<T>>,
    subgradient: Arc<GradFn<T>>,
    lipschitz: Option<T>,
    label: String,
}

impl<T: Scalar> FnConstraint<T> {
    pub fn new(
        label: impl Into<String>,
        value: impl Fn(&Vector<T>) -> T + Send + Sync + 'static,
        subgradient: impl Fn(&Vector<T>) -> Vector<T> + Send + Sync + 'static,
        lipschitz: Option<T>,
    ) -> Self {
        FnConstraint {
            value: Arc::new(value),
            subgradient: Arc::new(subgradient),
            lipschitz,
            label: label.into(),
        }
    }
}

impl<T: Scalar> fmt::Debug for FnConstraint<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnConstraint").field("label", &self.label).finish()
    }
}

impl<T: Scalar> ConstraintFunction<T> for FnConstraint<T> {
    fn value(&self, x: &Vector<T>) -> T {
        (self.value)(x)
    }

    fn subgradient(&self, x: &Vector<T>) -> Vector<T> {
        (self.subgradient)(x)
    }

    fn lipschitz_bound(&self) -> Option<T> {
        self.lipschitz
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}
