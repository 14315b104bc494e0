//! Projection onto an intersection of halfspaces by Dykstra's cyclic scheme.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ViError};
use crate::{Scalar, Vector};

/// The halfspace `{x : normal . x <= offset}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace<T> {
    pub normal: Vector<T>,
    pub offset: T,
}

impl<T: Scalar> Halfspace<T> {
    pub fn new(normal: Vector<T>, offset: T) -> Self {
        Halfspace { normal, offset }
    }

    /// Signed violation `normal . x - offset`.
    pub fn violation(&self, x: &Vector<T>) -> T {
        self.normal.dot(x) - self.offset
    }

    pub fn project(&self, x: &Vector<T>) -> Vector<T> {
        let v = self.violation(x);
        if v > T::zero() {
            x.add_scaled(-v / self.normal.norm_squared(), &self.normal)
        } else {
            x.clone()
        }
    }
}

pub(crate) fn max_violation<T: Scalar>(constraints: &[Halfspace<T>], x: &Vector<T>) -> T {
    constraints
        .iter()
        .map(|h| h.violation(x) / h.normal.norm())
        .fold(T::neg_infinity(), T::max)
}

/// Dykstra's alternating projections with correction terms.
///
/// Stops once a full cycle moves the iterate by at most `tol` and every
/// constraint is satisfied to `tol` (measured as Euclidean distance to the halfspace).
pub(crate) fn project_dykstra<T: Scalar>(
    constraints: &[Halfspace<T>],
    x: &Vector<T>,
    tol: T,
    max_cycles: usize,
) -> Result<Vector<T>> {
    if max_violation(constraints, x) <= T::zero() {
        return Ok(x.clone());
    }
    let dim = x.dim();
    let mut increments = vec![Vector::<T>::zeros(dim); constraints.len()];
    let mut current = x.clone();
    for _ in 0..max_cycles {
        let start = current.clone();
        for (h, q) in constraints.iter().zip(increments.iter_mut()) {
            let shifted = &current + q;
            let projected = h.project(&shifted);
            *q = &shifted - &projected;
            current = projected;
        }
        if current.distance_to(&start) <= tol && max_violation(constraints, &current) <= tol {
            return Ok(current);
        }
    }
    Err(ViError::DidNotConverge {
        what: "halfspace projection",
        iterations: max_cycles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector;

    #[test]
    fn single_halfspace_is_exact() {
        let h = Halfspace::new(vector::<f64>(&[1.0, 1.0]), 1.0);
        let p = h.project(&vector(&[1.0, 1.0]));
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn corner_of_square() {
        let cs = vec![
            Halfspace::new(vector::<f64>(&[1.0, 0.0]), 1.0),
            Halfspace::new(vector(&[0.0, 1.0]), 1.0),
            Halfspace::new(vector(&[-1.0, 0.0]), 0.0),
            Halfspace::new(vector(&[0.0, -1.0]), 0.0),
        ];
        let p = project_dykstra(&cs, &vector(&[3.0, 2.0]), 1e-12, 1000).unwrap();
        assert!(p.distance_to(&vector(&[1.0, 1.0])) < 1e-12);
    }
}
