//! Dense vectors and the handful of BLAS-1 style operations the solvers need.

use std::fmt;
use std::ops::Index;

use crate::scalar::Scalar;

/// Fixed-length dense vector over a [`Scalar`] type.
///
/// The length is set at construction and every binary operation panics on a
/// dimension mismatch. Entries are finite; constructors reject NaN/Inf.
#[derive(Clone, PartialEq)]
pub struct DenseVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> DenseVector<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![T::zero(); dim],
        }
    }

    /// Builds a vector from raw values. Panics if any entry is not finite.
    pub fn from_vec(values: Vec<T>) -> Self {
        assert!(
            values.iter().all(|v| v.is_finite()),
            "dense vector entries must be finite"
        );
        Self { values }
    }

    pub fn from_slice(values: &[T]) -> Self {
        Self::from_vec(values.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.values.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn assert_same_dim(&self, other: &Self) {
        assert_eq!(
            self.dim(),
            other.dim(),
            "dimension mismatch: {} vs {}",
            self.dim(),
            other.dim()
        );
    }

    /// Inner product `sum_i a_i b_i`.
    pub fn dot(&self, other: &Self) -> T {
        self.assert_same_dim(other);
        let mut acc = T::zero();
        for (a, b) in self.values.iter().zip(other.values.iter()) {
            acc += *a * *b;
        }
        acc
    }

    /// Euclidean norm, the default norm everywhere in the crate.
    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    /// `l_p` norm for `p >= 1`; pass `T::infinity()` for the max norm.
    pub fn norm_p(&self, p: T) -> T {
        assert!(p >= T::one(), "norm order must satisfy p >= 1");
        if p == T::infinity() {
            return self
                .values
                .iter()
                .fold(T::zero(), |acc, v| acc.max(v.abs()));
        }
        if p == T::two() {
            return self.norm();
        }
        if p == T::one() {
            let mut acc = T::zero();
            for v in &self.values {
                acc += v.abs();
            }
            return acc;
        }
        let mut acc = T::zero();
        for v in &self.values {
            acc += v.abs().powf(p);
        }
        acc.powf(T::one() / p)
    }

    /// Returns `alpha * x + y` elementwise.
    pub fn axpy(alpha: T, x: &Self, y: &Self) -> Self {
        x.assert_same_dim(y);
        let values = x
            .values
            .iter()
            .zip(y.values.iter())
            .map(|(xi, yi)| alpha * *xi + *yi)
            .collect();
        let out = Self { values };
        debug_assert!(out.is_finite());
        out
    }

    /// `self += alpha * x` in place.
    pub fn add_scaled(&mut self, alpha: T, x: &Self) {
        self.assert_same_dim(x);
        for (s, xi) in self.values.iter_mut().zip(x.values.iter()) {
            *s += alpha * *xi;
        }
        debug_assert!(self.is_finite());
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::axpy(T::one(), other, self)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::axpy(-T::one(), other, self)
    }

    pub fn scale(&self, alpha: T) -> Self {
        let out = Self {
            values: self.values.iter().map(|v| alpha * *v).collect(),
        };
        debug_assert!(out.is_finite());
        out
    }

    /// Weighted sum `sum_j c_j v_j`, accumulated left to right.
    pub fn linear_combination(terms: &[(T, &Self)]) -> Self {
        let (c0, v0) = terms.first().expect("at least one term");
        let mut out = v0.scale(*c0);
        for (c, v) in &terms[1..] {
            out.add_scaled(*c, v);
        }
        out
    }

    pub fn dist_sq(&self, other: &Self) -> T {
        self.assert_same_dim(other);
        let mut acc = T::zero();
        for (a, b) in self.values.iter().zip(other.values.iter()) {
            let d = *a - *b;
            acc += d * d;
        }
        acc
    }

    pub fn dist(&self, other: &Self) -> T {
        self.dist_sq(other).sqrt()
    }
}

impl<T: Scalar> Index<usize> for DenseVector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.values[i]
    }
}

impl<T: fmt::Debug> fmt::Debug for DenseVector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.values.iter()).finish()
    }
}
