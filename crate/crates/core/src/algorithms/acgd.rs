//! Accelerated compressed gradient descent (three-sequence momentum).
//!
//! One iteration:
//! ```text
//! x_k   = theta_k y_k + (1 - theta_k) z_k
//! g_k   = C(grad f(x_k))
//! y_k+1 = x_k - (eta_k / p) g_k
//! z_k+1 = (1/gamma_k) y_k+1 + (1/p - 1/gamma_k) y_k
//!         + (1 - 1/p)(1 - beta_k) z_k + (1 - 1/p) beta_k x_k
//! ```
//! With no compression (`omega = 0`, so `p = 1`) the last two z-terms vanish
//! and the trajectory is classical accelerated gradient descent.

use crate::compressors::Compressor;
use crate::objective::Objective;
use crate::rng::{StreamFactory, CHANNEL_GRADIENT};
use crate::scalar::Scalar;
use crate::vector::DenseVector;

use super::schedule::AcgdSchedule;
use super::StepOutcome;

#[derive(Clone, Debug)]
pub struct AcgdState<T> {
    /// Extrapolation point used in the most recent step.
    pub x: DenseVector<T>,
    pub y: DenseVector<T>,
    pub z: DenseVector<T>,
    pub k: u64,
}

impl<T: Scalar> AcgdState<T> {
    /// `z0 = y0 = x0`.
    pub fn new(x0: DenseVector<T>) -> Self {
        Self {
            x: x0.clone(),
            y: x0.clone(),
            z: x0,
            k: 0,
        }
    }
}

pub fn acgd_step<T: Scalar>(
    state: &AcgdState<T>,
    obj: &Objective<T>,
    comp: &Compressor,
    sched: &AcgdSchedule<T>,
    streams: &StreamFactory,
) -> StepOutcome<AcgdState<T>> {
    let k = state.k;
    let theta = sched.theta(k);
    let beta = sched.beta(k);
    let gamma = sched.gamma(k);
    let one = T::one();
    let inv_p = one / sched.p;
    let inv_gamma = one / gamma;

    let x = DenseVector::linear_combination(&[(theta, &state.y), (one - theta, &state.z)]);
    let grad = obj.grad_full(&x);
    let mut stream = streams.stream(0, k, CHANNEL_GRADIENT);
    let msg = comp.compress(&grad, &mut stream);
    let y_next = DenseVector::axpy(-(sched.eta * inv_p), &msg.payload, &x);
    let z_next = DenseVector::linear_combination(&[
        (inv_gamma, &y_next),
        (inv_p - inv_gamma, &state.y),
        ((one - inv_p) * (one - beta), &state.z),
        ((one - inv_p) * beta, &x),
    ]);

    StepOutcome {
        state: AcgdState {
            x,
            y: y_next,
            z: z_next,
            k: k + 1,
        },
        bits_sent: msg.bit_cost,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::schedule::AcgdMode;
    use crate::objective::{QuadraticLoss, Regularizer, SmoothLoss};

    fn quadratic(diag: Vec<f64>, b: Vec<f64>) -> Objective<f64> {
        Objective::new(
            vec![SmoothLoss::Quadratic(QuadraticLoss::diagonal(
                DenseVector::from_vec(diag),
                DenseVector::from_vec(b),
            ))],
            Regularizer::Zero,
        )
        .unwrap()
    }

    #[test]
    fn convex_first_step_ignores_y() {
        // theta_0 = 0 puts all the weight of x^0 on z^0 = y^0
        let obj = quadratic(vec![1.0, 2.0], vec![0.5, -0.5]);
        let sched = AcgdSchedule::new(AcgdMode::Convex, 2.0, 0.0, 3.0).unwrap();
        let x0 = DenseVector::from_vec(vec![1.0, 2.0]);
        let state = AcgdState::new(x0.clone());
        let out = acgd_step(
            &state,
            &obj,
            &Compressor::identity(2),
            &sched,
            &StreamFactory::new(0),
        );
        assert_eq!(out.state.x, x0);
    }

    #[test]
    fn no_compression_collapses_to_two_term_z_update() {
        // p = 1: z' = y'/gamma + (1 - 1/gamma) y, bitwise
        let obj = quadratic(vec![1.0, 0.25], vec![0.0, 1.0]);
        let sched = AcgdSchedule::new(AcgdMode::StronglyConvex, 1.0, 0.25, 0.0).unwrap();
        let state = AcgdState::new(DenseVector::from_vec(vec![0.7, -1.3]));
        let out = acgd_step(
            &state,
            &obj,
            &Compressor::identity(2),
            &sched,
            &StreamFactory::new(0),
        );
        let gamma = sched.gamma(0);
        let expected = DenseVector::linear_combination(&[
            (1.0 / gamma, &out.state.y),
            (1.0 - 1.0 / gamma, &state.y),
        ]);
        assert_eq!(out.state.z, expected);
    }
}
