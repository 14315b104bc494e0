//! Dense points of the Euclidean space the problems live in.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Result, ViError};
use crate::Scalar;

/// A point of `R^n`, `n >= 1`. Only the Euclidean norm is used anywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector<T>(Vec<T>);

impl<T: Scalar> Vector<T> {
    /// Validating constructor: rejects empty input and NaN/Inf coordinates.
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if coords.is_empty() {
            return Err(ViError::EmptyVector);
        }
        if let Some(index) = coords.iter().position(|c| !c.is_finite()) {
            return Err(ViError::NonFiniteCoordinate { index });
        }
        Ok(Vector(coords))
    }

    pub fn from_slice(coords: &[T]) -> Result<Self> {
        Self::new(coords.to_vec())
    }

    /// Skips validation. Used for results of arithmetic on valid vectors.
    pub(crate) fn raw(coords: Vec<T>) -> Self {
        Vector(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![T::zero(); dim])
    }

    pub fn basis(dim: usize, axis: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[axis] = T::one();
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| c.is_zero())
    }

    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| *a * *b).sum()
    }

    pub fn norm_squared(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    pub fn distance_to(&self, other: &Self) -> T {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (*a - *b) * (*a - *b))
            .sum::<T>()
            .sqrt()
    }

    pub fn scale(&self, s: T) -> Self {
        Vector(self.0.iter().map(|c| *c * s).collect())
    }

    /// `self + s * other`
    pub fn add_scaled(&self, s: T, other: &Self) -> Self {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| *a + s * *b).collect())
    }

    /// Unit vector in the same direction, `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        if n > T::zero() && n.is_finite() {
            Some(self.scale(T::one() / n))
        } else {
            None
        }
    }

    pub fn max_abs(&self) -> T {
        self.0.iter().fold(T::zero(), |m, c| m.max(c.abs()))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Vector(self.0.iter().map(|c| f(*c)).collect())
    }

    pub(crate) fn ensure_dim(&self, expected: usize) -> Result<()> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(ViError::DimensionMismatch {
                expected,
                got: self.dim(),
            })
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.to_f64_lossy()).collect()
    }
}

impl<T: Scalar> Index<usize> for Vector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T: Scalar> IndexMut<usize> for Vector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

impl<T: Scalar> Add for &Vector<T> {
    type Output = Vector<T>;
    fn add(self, rhs: Self) -> Vector<T> {
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| *a + *b).collect())
    }
}

impl<T: Scalar> Sub for &Vector<T> {
    type Output = Vector<T>;
    fn sub(self, rhs: Self) -> Vector<T> {
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| *a - *b).collect())
    }
}

impl<T: Scalar> Mul<T> for &Vector<T> {
    type Output = Vector<T>;
    fn mul(self, rhs: T) -> Vector<T> {
        self.scale(rhs)
    }
}

impl<T: Scalar> Neg for &Vector<T> {
    type Output = Vector<T>;
    fn neg(self) -> Vector<T> {
        Vector(self.0.iter().map(|c| -*c).collect())
    }
}

impl<T: Scalar> TryFrom<Vec<T>> for Vector<T> {
    type Error = ViError;
    fn try_from(v: Vec<T>) -> Result<Self> {
        Vector::new(v)
    }
}

/// Shorthand for tests and examples: builds a vector from `f64` literals.
pub fn vector<T: Scalar>(coords: &[f64]) -> Vector<T> {
    Vector::new(coords.iter().map(|c| T::lit(*c)).collect()).expect("invalid literal vector")
}
