//! Shared builders and independent oracles for the integration suites.
#![allow(dead_code)]

use compgrad::{
    DenseVector, LogisticLoss, Objective, QuadraticLoss, Regularizer, RngStream, SmoothLoss,
    SparseRow, StreamKey, Vector64,
};

/// Seeded scalar source for test data, independent of the library's
/// algorithm channels.
pub struct TestRng(RngStream);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(RngStream::new(
            seed,
            StreamKey {
                node: 0,
                iteration: 0,
                channel: 1_000,
            },
        ))
    }

    pub fn uniform(&mut self) -> f64 {
        self.0.draw_uniform()
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1: f64 = self.uniform().max(1e-300);
        let u2: f64 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn gaussian_vector(&mut self, d: usize, scale: f64) -> Vector64 {
        Vector64::from_vec((0..d).map(|_| scale * self.normal()).collect())
    }

    pub fn subset(&mut self, d: usize, k: usize) -> Vec<usize> {
        self.0.draw_subset(d, k)
    }
}

/// Diagonal quadratic with closed-form optimum: `x*_j = b_j / diag_j`,
/// `f* = -(1/2) sum_j b_j^2 / diag_j`.
pub struct QuadraticProblem {
    pub objective: Objective<f64>,
    pub x_star: Vector64,
    pub f_star: f64,
    pub l: f64,
    pub mu: f64,
}

pub fn diagonal_quadratic(diag: Vec<f64>, b: Vec<f64>) -> QuadraticProblem {
    let x_star = Vector64::from_vec(
        diag.iter()
            .zip(b.iter())
            .map(|(d, bj)| if *d > 0.0 { bj / d } else { 0.0 })
            .collect(),
    );
    let f_star = -0.5
        * diag
            .iter()
            .zip(b.iter())
            .map(|(d, bj)| if *d > 0.0 { bj * bj / d } else { 0.0 })
            .sum::<f64>();
    let l = diag.iter().cloned().fold(0.0f64, f64::max);
    let mu = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let objective = Objective::new(
        vec![SmoothLoss::Quadratic(QuadraticLoss::diagonal(
            Vector64::from_vec(diag),
            Vector64::from_vec(b),
        ))],
        Regularizer::Zero,
    )
    .unwrap();
    QuadraticProblem {
        objective,
        x_star,
        f_star,
        l,
        mu,
    }
}

/// The conditioning benchmark: d = 20 diagonal quadratic with eigenvalues
/// log-spaced over [mu, l] (both endpoints included) and b = 0, so
/// x* = 0 and f* = 0.
pub fn conditioned_quadratic(d: usize, mu: f64, l: f64) -> QuadraticProblem {
    let diag: Vec<f64> = (0..d)
        .map(|j| {
            let t = j as f64 / (d - 1) as f64;
            (mu.ln() + t * (l.ln() - mu.ln())).exp()
        })
        .collect();
    let mut diag = diag;
    diag[0] = mu;
    diag[d - 1] = l;
    diagonal_quadratic(diag, vec![0.0; d])
}

/// Heterogeneous two-node diagonal quadratic where every quantity along a
/// gradient-descent trajectory stays exactly representable: per-coordinate
/// eigenvalue pairs average to {1, 3/2, 7/4, 2}, so with step 1/2 the
/// contraction factors are {1/2, 1/4, 1/8, 0}; b = 0 keeps iterates dyadic.
pub fn dyadic_two_node_quadratic(d: usize) -> (Objective<f64>, Vector64) {
    let pairs: [(f64, f64); 4] = [(1.0, 1.0), (1.0, 2.0), (1.5, 2.0), (2.0, 2.0)];
    let mut diag_a = Vec::with_capacity(d);
    let mut diag_b = Vec::with_capacity(d);
    for j in 0..d {
        let (a, b) = pairs[j % pairs.len()];
        diag_a.push(a);
        diag_b.push(b);
    }
    let node = |diag: Vec<f64>| {
        SmoothLoss::Quadratic(QuadraticLoss::diagonal(
            Vector64::from_vec(diag),
            Vector64::zeros(d),
        ))
    };
    let objective = Objective::new(vec![node(diag_a), node(diag_b)], Regularizer::Zero).unwrap();
    let x0 = Vector64::from_vec((0..d).map(|j| ((j % 19) as f64) - 9.0).collect());
    // avoid exact-zero starting coordinates
    let x0 = Vector64::from_vec(
        x0.iter()
            .map(|v| if *v == 0.0 { 5.0 } else { *v })
            .collect(),
    );
    (objective, x0)
}

/// Synthetic sparse binary classification data in LIBSVM text form:
/// `nnz` active features per row at value `scale`, labels from a random
/// hyperplane with some noise.
pub fn synthetic_libsvm_text(seed: u64, m: usize, d: usize, nnz: usize, scale: f64) -> String {
    synthetic_libsvm_text_noisy(seed, m, d, nnz, scale, 0.3)
}

/// Like [`synthetic_libsvm_text`] with control over the label noise; zero
/// noise gives linearly separable data.
pub fn synthetic_libsvm_text_noisy(
    seed: u64,
    m: usize,
    d: usize,
    nnz: usize,
    scale: f64,
    label_noise: f64,
) -> String {
    let mut rng = TestRng::new(seed);
    let w_star: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let mut out = String::new();
    for _ in 0..m {
        let idxs = rng.subset(d, nnz);
        let logit: f64 = idxs.iter().map(|&j| scale * w_star[j]).sum::<f64>() / (nnz as f64).sqrt();
        let label = if logit + label_noise * rng.normal() > 0.0 {
            "+1"
        } else {
            "-1"
        };
        out.push_str(label);
        for j in &idxs {
            out.push_str(&format!(" {}:{}", j + 1, scale));
        }
        out.push('\n');
    }
    out
}

/// In-memory synthetic ridge-logistic objective with dense gaussian rows.
pub fn synthetic_logistic_objective(
    seed: u64,
    nodes: usize,
    samples_per_node: usize,
    d: usize,
    ridge: f64,
) -> Objective<f64> {
    let mut rng = TestRng::new(seed);
    let w_star: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let node_losses: Vec<SmoothLoss<f64>> = (0..nodes)
        .map(|_| {
            let mut rows = Vec::with_capacity(samples_per_node);
            let mut labels = Vec::with_capacity(samples_per_node);
            for _ in 0..samples_per_node {
                let values: Vec<f64> = (0..d).map(|_| rng.normal() / (d as f64).sqrt()).collect();
                let logit: f64 = values.iter().zip(w_star.iter()).map(|(a, w)| a * w).sum();
                let label = if logit + 0.3 * rng.normal() > 0.0 {
                    1.0
                } else {
                    -1.0
                };
                rows.push(SparseRow {
                    indices: (0..d as u32).collect(),
                    values,
                });
                labels.push(label);
            }
            SmoothLoss::Logistic(LogisticLoss::new(rows, labels, ridge, d))
        })
        .collect();
    Objective::new(node_losses, Regularizer::Zero).unwrap()
}

/// Independent classical-GD step oracle: `x' = x - eta * grad f(x)`.
pub fn gd_step(obj: &Objective<f64>, x: &Vector64, eta: f64) -> Vector64 {
    DenseVector::axpy(-eta, &obj.grad_full(x), x)
}

/// Independent distributed-GD step oracle: average the node gradients
/// (sum in node order, then scale), then step.
pub fn distributed_gd_step(obj: &Objective<f64>, x: &Vector64, eta: f64) -> Vector64 {
    let mut acc = obj.grad_node(0, x);
    for i in 1..obj.node_count() {
        acc.add_scaled(1.0, &obj.grad_node(i, x));
    }
    let g = acc.scale(1.0 / obj.node_count() as f64);
    DenseVector::axpy(-eta, &g, x)
}

/// Independent classical accelerated-gradient oracle in constant-parameter
/// three-sequence form.
pub struct AgdOracle {
    pub theta: f64,
    pub gamma: f64,
    pub eta: f64,
    pub y: Vector64,
    pub z: Vector64,
}

impl AgdOracle {
    pub fn new(l: f64, mu: f64, x0: Vector64) -> Self {
        let s = (mu / l).sqrt();
        Self {
            theta: 1.0 / (1.0 + s),
            gamma: s,
            eta: 1.0 / l,
            y: x0.clone(),
            z: x0,
        }
    }

    pub fn step(&mut self, obj: &Objective<f64>) {
        let x =
            DenseVector::linear_combination(&[(self.theta, &self.y), (1.0 - self.theta, &self.z)]);
        let y_next = DenseVector::axpy(-self.eta, &obj.grad_full(&x), &x);
        let z_next = DenseVector::linear_combination(&[
            (1.0 / self.gamma, &y_next),
            (1.0 - 1.0 / self.gamma, &self.y),
        ]);
        self.y = y_next;
        self.z = z_next;
    }
}

pub fn assert_bitwise_eq(a: &Vector64, b: &Vector64, context: &str) {
    assert_eq!(a.dim(), b.dim(), "{context}: dimension");
    for i in 0..a.dim() {
        assert_eq!(
            a[i].to_bits(),
            b[i].to_bits(),
            "{context}: coordinate {i}: {} vs {}",
            a[i],
            b[i]
        );
    }
}

/// Central finite-difference gradient of the smooth part.
pub fn finite_difference_grad(obj: &Objective<f64>, x: &Vector64, h: f64) -> Vector64 {
    let d = x.dim();
    let mut g = Vec::with_capacity(d);
    for j in 0..d {
        let mut plus = x.as_slice().to_vec();
        let mut minus = x.as_slice().to_vec();
        plus[j] += h;
        minus[j] -= h;
        let fp = obj.smooth_value(&Vector64::from_vec(plus));
        let fm = obj.smooth_value(&Vector64::from_vec(minus));
        g.push((fp - fm) / (2.0 * h));
    }
    Vector64::from_vec(g)
}
