//! Finite-sum objectives: per-node smooth losses, a proximable regularizer,
//! and smoothness / strong-convexity constant estimation.
//!
//! The problem is `P(x) = (1/n) sum_i f_i(x) + psi(x)` where each `f_i` is
//! either a ridge-regularized logistic loss over that node's samples or a
//! quadratic `f(x) = x'Ax/2 - b'x` with spectrum bounds supplied up front.

use thiserror::Error;

use crate::dataset::{Partition, SparseDataset, SparseRow};
use crate::rng::{RngStream, StreamKey};
use crate::scalar::Scalar;
use crate::vector::DenseVector;

/// Nonsmooth term `psi` with a closed-form proximal operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regularizer<T> {
    Zero,
    Ridge(T),
    L1(T),
}

impl<T: Scalar> Regularizer<T> {
    pub fn value(&self, x: &DenseVector<T>) -> T {
        match self {
            Regularizer::Zero => T::zero(),
            Regularizer::Ridge(lambda) => *lambda * T::half() * x.dot(x),
            Regularizer::L1(lambda) => *lambda * x.norm_p(T::one()),
        }
    }

    /// `prox_{eta psi}(v) = argmin_u ||u - v||^2 / 2 + eta psi(u)`.
    pub fn prox(&self, eta: T, v: &DenseVector<T>) -> DenseVector<T> {
        assert!(eta > T::zero(), "prox step must be positive");
        match self {
            Regularizer::Zero => v.clone(),
            Regularizer::Ridge(lambda) => v.scale(T::one() / (T::one() + eta * *lambda)),
            Regularizer::L1(lambda) => {
                let t = eta * *lambda;
                let shrunk = v
                    .iter()
                    .map(|vi| vi.signum() * (vi.abs() - t).max(T::zero()))
                    .collect();
                DenseVector::from_vec(shrunk)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Regularizer::Zero)
    }
}

/// Quadratic loss `x'Ax/2 - b'x` with `A` symmetric PSD.
#[derive(Clone, Debug)]
pub struct QuadraticLoss<T> {
    matrix: QuadraticMatrix<T>,
    linear: DenseVector<T>,
    lambda_min: T,
    lambda_max: T,
}

#[derive(Clone, Debug)]
enum QuadraticMatrix<T> {
    Diagonal(DenseVector<T>),
    Dense { data: Vec<T>, dim: usize },
}

impl<T: Scalar> QuadraticLoss<T> {
    /// `f(x) = sum_j diag_j x_j^2 / 2 - b'x`; spectrum bounds are the
    /// extreme diagonal entries.
    pub fn diagonal(diag: DenseVector<T>, linear: DenseVector<T>) -> Self {
        assert_eq!(diag.dim(), linear.dim());
        assert!(diag.iter().all(|v| *v >= T::zero()), "diagonal must be PSD");
        let lambda_min = diag.iter().fold(T::infinity(), |a, v| a.min(*v));
        let lambda_max = diag.iter().fold(T::zero(), |a, v| a.max(*v));
        Self {
            matrix: QuadraticMatrix::Diagonal(diag),
            linear,
            lambda_min,
            lambda_max,
        }
    }

    /// Dense symmetric `A` (row-major), with caller-supplied spectrum bounds.
    pub fn dense(data: Vec<T>, linear: DenseVector<T>, lambda_min: T, lambda_max: T) -> Self {
        let dim = linear.dim();
        assert_eq!(data.len(), dim * dim);
        assert!(lambda_min >= T::zero() && lambda_min <= lambda_max);
        Self {
            matrix: QuadraticMatrix::Dense { data, dim },
            linear,
            lambda_min,
            lambda_max,
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.dim()
    }

    fn apply(&self, x: &DenseVector<T>) -> DenseVector<T> {
        match &self.matrix {
            QuadraticMatrix::Diagonal(diag) => {
                DenseVector::from_vec(diag.iter().zip(x.iter()).map(|(d, xi)| *d * *xi).collect())
            }
            QuadraticMatrix::Dense { data, dim } => {
                let mut out = vec![T::zero(); *dim];
                for (r, out_r) in out.iter_mut().enumerate() {
                    let row = &data[r * dim..(r + 1) * dim];
                    let mut acc = T::zero();
                    for (a, xi) in row.iter().zip(x.iter()) {
                        acc += *a * *xi;
                    }
                    *out_r = acc;
                }
                DenseVector::from_vec(out)
            }
        }
    }

    pub fn value(&self, x: &DenseVector<T>) -> T {
        T::half() * x.dot(&self.apply(x)) - self.linear.dot(x)
    }

    pub fn grad(&self, x: &DenseVector<T>) -> DenseVector<T> {
        self.apply(x).sub(&self.linear)
    }
}

/// Ridge-regularized logistic loss over one node's samples:
/// `f(x) = (1/m) sum_j log(1 + exp(-b_j a_j'x)) + (ridge/2) ||x||^2`.
#[derive(Clone, Debug)]
pub struct LogisticLoss<T> {
    rows: Vec<SparseRow<T>>,
    labels: Vec<T>,
    ridge: T,
    dim: usize,
}

// log(1 + exp(t)) without overflow.
fn log1p_exp<T: Scalar>(t: T) -> T {
    if t > T::zero() {
        t + t.neg().exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

impl<T: Scalar> LogisticLoss<T> {
    pub fn new(rows: Vec<SparseRow<T>>, labels: Vec<T>, ridge: T, dim: usize) -> Self {
        assert_eq!(rows.len(), labels.len());
        assert!(!rows.is_empty(), "logistic loss needs at least one sample");
        assert!(
            labels.iter().all(|b| *b == T::one() || *b == -T::one()),
            "labels must be exactly +-1"
        );
        assert!(ridge >= T::zero());
        Self {
            rows,
            labels,
            ridge,
            dim,
        }
    }

    pub fn sample_count(&self) -> usize {
        self.rows.len()
    }

    pub fn value(&self, x: &DenseVector<T>) -> T {
        let mut acc = T::zero();
        for (row, b) in self.rows.iter().zip(self.labels.iter()) {
            acc += log1p_exp(-(*b) * row.dot(x));
        }
        acc / T::from_count(self.rows.len()) + self.ridge * T::half() * x.dot(x)
    }

    pub fn grad(&self, x: &DenseVector<T>) -> DenseVector<T> {
        let mut out = vec![T::zero(); self.dim];
        for (row, b) in self.rows.iter().zip(self.labels.iter()) {
            // d/dx log(1+exp(-b a'x)) = -b a / (1 + exp(b a'x))
            let sigma = T::one() / (T::one() + (*b * row.dot(x)).exp());
            row.scatter_add(-(*b) * sigma, &mut out);
        }
        let inv_m = T::one() / T::from_count(self.rows.len());
        let mut g = DenseVector::from_vec(out).scale(inv_m);
        g.add_scaled(self.ridge, x);
        g
    }
}

/// One node's smooth loss `f_i`.
#[derive(Clone, Debug)]
pub enum SmoothLoss<T> {
    Logistic(LogisticLoss<T>),
    Quadratic(QuadraticLoss<T>),
}

impl<T: Scalar> SmoothLoss<T> {
    pub fn dim(&self) -> usize {
        match self {
            SmoothLoss::Logistic(l) => l.dim,
            SmoothLoss::Quadratic(q) => q.dim(),
        }
    }

    pub fn value(&self, x: &DenseVector<T>) -> T {
        match self {
            SmoothLoss::Logistic(l) => l.value(x),
            SmoothLoss::Quadratic(q) => q.value(x),
        }
    }

    pub fn grad(&self, x: &DenseVector<T>) -> DenseVector<T> {
        match self {
            SmoothLoss::Logistic(l) => l.grad(x),
            SmoothLoss::Quadratic(q) => q.grad(x),
        }
    }
}

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("objective needs at least one node")]
    NoNodes,
    #[error("node {node} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        node: usize,
        got: usize,
        expected: usize,
    },
}

/// Metadata from constant estimation.
#[derive(Clone, Copy, Debug, Default)]
pub struct ConstantsMeta {
    /// True when any node's power iteration failed to converge and the
    /// Frobenius upper bound was used instead.
    pub frobenius_fallback: bool,
}

/// The full finite-sum problem with its estimated constants.
#[derive(Clone, Debug)]
pub struct Objective<T> {
    nodes: Vec<SmoothLoss<T>>,
    regularizer: Regularizer<T>,
    smoothness: T,
    strong_convexity: T,
    dim: usize,
    meta: ConstantsMeta,
}

impl<T: Scalar> Objective<T> {
    /// Builds the objective and estimates `(L, mu)` for it.
    pub fn new(
        nodes: Vec<SmoothLoss<T>>,
        regularizer: Regularizer<T>,
    ) -> Result<Self, ObjectiveError> {
        let dim = nodes.first().ok_or(ObjectiveError::NoNodes)?.dim();
        for (i, node) in nodes.iter().enumerate() {
            if node.dim() != dim {
                return Err(ObjectiveError::DimensionMismatch {
                    node: i,
                    got: node.dim(),
                    expected: dim,
                });
            }
        }
        let (smoothness, strong_convexity, meta) = estimate_constants(&nodes);
        Ok(Self {
            nodes,
            regularizer,
            smoothness,
            strong_convexity,
            dim,
            meta,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn regularizer(&self) -> &Regularizer<T> {
        &self.regularizer
    }

    /// Uniform smoothness constant `L` (max over nodes).
    pub fn smoothness(&self) -> T {
        self.smoothness
    }

    /// Strong convexity `mu` of the smooth mean `f`.
    pub fn strong_convexity(&self) -> T {
        self.strong_convexity
    }

    pub fn constants_meta(&self) -> ConstantsMeta {
        self.meta
    }

    /// `grad f_i(x)` for node `i`.
    pub fn grad_node(&self, i: usize, x: &DenseVector<T>) -> DenseVector<T> {
        self.nodes[i].grad(x)
    }

    /// `grad f(x) = (1/n) sum_i grad f_i(x)`.
    pub fn grad_full(&self, x: &DenseVector<T>) -> DenseVector<T> {
        let mut acc = self.nodes[0].grad(x);
        for node in &self.nodes[1..] {
            acc.add_scaled(T::one(), &node.grad(x));
        }
        acc.scale(T::one() / T::from_count(self.nodes.len()))
    }

    /// Smooth part `f(x)`.
    pub fn smooth_value(&self, x: &DenseVector<T>) -> T {
        let mut acc = T::zero();
        for node in &self.nodes {
            acc += node.value(x);
        }
        acc / T::from_count(self.nodes.len())
    }

    /// Full objective `P(x) = f(x) + psi(x)`.
    pub fn value(&self, x: &DenseVector<T>) -> T {
        self.smooth_value(x) + self.regularizer.value(x)
    }

    pub fn prox(&self, eta: T, v: &DenseVector<T>) -> DenseVector<T> {
        self.regularizer.prox(eta, v)
    }
}

const POWER_ITER_TOL: f64 = 1e-6;
const POWER_ITER_MAX: usize = 500;
// Internal fixed seed so constant estimation never depends on the run seed.
const POWER_ITER_SEED: u64 = 0x535f45;

/// Largest eigenvalue of `A'A` by power iteration on `v -> A'(A v)`.
/// Returns `None` when the tolerance is not met within the iteration cap.
fn power_iteration_gram<T: Scalar>(rows: &[SparseRow<T>], dim: usize, node: u32) -> Option<T> {
    let mut stream = RngStream::new(
        POWER_ITER_SEED,
        StreamKey {
            node,
            iteration: 0,
            channel: 0,
        },
    );
    let mut v = DenseVector::from_vec(
        (0..dim)
            .map(|_| stream.draw_uniform::<T>() - T::half())
            .collect(),
    );
    let norm = v.norm();
    if norm == T::zero() {
        return None;
    }
    v = v.scale(T::one() / norm);

    let apply = |v: &DenseVector<T>| {
        let mut out = vec![T::zero(); dim];
        for row in rows {
            row.scatter_add(row.dot(v), &mut out);
        }
        DenseVector::from_vec(out)
    };

    let tol = T::from_config(POWER_ITER_TOL);
    let mut lambda = T::zero();
    for _ in 0..POWER_ITER_MAX {
        let w = apply(&v);
        let new_lambda = v.dot(&w);
        let w_norm = w.norm();
        if w_norm == T::zero() {
            return Some(T::zero()); // A'A v = 0: matrix is zero on this start
        }
        let prev = lambda;
        v = w.scale(T::one() / w_norm);
        lambda = new_lambda;
        if (lambda - prev).abs() <= tol * lambda.max(T::one()) && prev != T::zero() {
            return Some(lambda);
        }
    }
    None
}

fn estimate_constants<T: Scalar>(nodes: &[SmoothLoss<T>]) -> (T, T, ConstantsMeta) {
    let mut l = T::zero();
    let mut mu_acc = T::zero();
    let mut meta = ConstantsMeta::default();
    for (i, node) in nodes.iter().enumerate() {
        let (l_i, mu_i) = match node {
            SmoothLoss::Quadratic(q) => (q.lambda_max, q.lambda_min),
            SmoothLoss::Logistic(log) => {
                let m = T::from_count(log.sample_count());
                let four = T::two() * T::two();
                let data_l = match power_iteration_gram(&log.rows, log.dim, i as u32) {
                    Some(lam) => lam / (four * m),
                    None => {
                        meta.frobenius_fallback = true;
                        let mut fro = T::zero();
                        for row in &log.rows {
                            fro += row.norm_sq();
                        }
                        fro / (four * m)
                    }
                };
                (log.ridge + data_l, log.ridge)
            }
        };
        l = l.max(l_i);
        mu_acc += mu_i;
    }
    // f = (1/n) sum f_i is at least mean(mu_i)-strongly convex.
    let mu = mu_acc / T::from_count(nodes.len());
    (l, mu, meta)
}

/// Builds the ridge-in-f logistic objective from a partitioned dataset.
pub fn logistic_objective<T: Scalar>(
    ds: &SparseDataset<T>,
    partition: &Partition,
    ridge: T,
    regularizer: Regularizer<T>,
) -> Result<Objective<T>, ObjectiveError> {
    let nodes = partition
        .nodes()
        .iter()
        .map(|idxs| {
            let rows = idxs.iter().map(|&j| ds.rows()[j].clone()).collect();
            let labels = idxs.iter().map(|&j| ds.labels()[j]).collect();
            SmoothLoss::Logistic(LogisticLoss::new(rows, labels, ridge, ds.dim()))
        })
        .collect();
    Objective::new(nodes, regularizer)
}
