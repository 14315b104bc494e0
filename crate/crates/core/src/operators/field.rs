use std::fmt;
use std::sync::Arc;

use crate::error::{Result, ViError};
use crate::{Scalar, Vector};

/// The map `x -> F(x)`. Implementations must be pure.
pub trait VectorField<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &Vector<T>) -> Vector<T>;
}

/// `F(x) = A x + b` with `A` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineField<T> {
    dim: usize,
    matrix: Vec<T>,
    offset: Vector<T>,
}

impl<T: Scalar> AffineField<T> {
    pub fn new(rows: Vec<Vec<T>>, offset: Vector<T>) -> Result<Self> {
        let dim = offset.dim();
        if rows.len() != dim {
            return Err(ViError::DimensionMismatch {
                expected: dim,
                got: rows.len(),
            });
        }
        let mut matrix = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(ViError::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(ViError::NonFiniteOperatorValue);
            }
            matrix.extend(row);
        }
        Ok(AffineField { dim, matrix, offset })
    }

    pub fn entry(&self, row: usize, col: usize) -> T {
        self.matrix[row * self.dim + col]
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.matrix.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn offset(&self) -> &Vector<T> {
        &self.offset
    }

    /// Smallest eigenvalue lower bound of the symmetric part via Gershgorin discs.
    pub fn symmetric_gershgorin_bound(&self) -> T {
        let half = T::lit(0.5);
        (0..self.dim)
            .map(|i| {
                let diag = self.entry(i, i);
                let off: T = (0..self.dim)
                    .filter(|&j| j != i)
                    .map(|j| (half * (self.entry(i, j) + self.entry(j, i))).abs())
                    .sum();
                diag - off
            })
            .fold(T::infinity(), T::min)
    }
}

impl<T: Scalar> VectorField<T> for AffineField<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &Vector<T>) -> Vector<T> {
        Vector::raw(
            self.matrix
                .chunks(self.dim)
                .zip(self.offset.iter())
                .map(|(row, b)| row.iter().zip(x.iter()).map(|(a, v)| *a * *v).sum::<T>() + *b)
                .collect(),
        )
    }
}

/// Componentwise `F_i(x) = x_i + amplitude * x_i^2 * sin(frequency * x_i)`:
/// oriented toward the origin on `[-1, 1]` for `amplitude < 1`, but not monotone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatingField<T> {
    pub dim: usize,
    pub amplitude: T,
    pub frequency: T,
}

impl<T: Scalar> VectorField<T> for OscillatingField<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &Vector<T>) -> Vector<T> {
        x.map(|v| v + self.amplitude * v * v * (self.frequency * v).sin())
    }
}

type FieldFn<T> = dyn Fn(&Vector<T>) -> Vector<T> + Send + Sync;

/// Closure-backed field.
#[derive(Clone)]
pub struct FnField<T> {
    dim: usize,
    f: Arc<FieldFn<T>>,
}

impl<T: Scalar> FnField<T> {
    pub fn new(dim: usize, f: impl Fn(&Vector<T>) -> Vector<T> + Send + Sync + 'static) -> Self {
        FnField { dim, f: Arc::new(f) }
    }
}

impl<T> fmt::Debug for FnField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnField").field("dim", &self.dim).finish()
    }
}

impl<T: Scalar> VectorField<T> for FnField<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &Vector<T>) -> Vector<T> {
        (self.f)(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector;

    #[test]
    fn affine_eval() {
        let f = AffineField::new(vec![vec![1.0, 2.0], vec![0.0, 1.0]], vector(&[1.0, -1.0])).unwrap();
        assert_eq!(f.eval(&vector(&[1.0, 1.0])), vector(&[4.0, 0.0]));
        assert!(AffineField::new(vec![vec![1.0]], vector::<f64>(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn gershgorin_bound_ignores_skew_part() {
        let f = AffineField::new(vec![vec![1.0, 5.0], vec![-5.0, 1.0]], vector::<f64>(&[0.0, 0.0])).unwrap();
        assert_eq!(f.symmetric_gershgorin_bound(), 1.0);
    }
}
