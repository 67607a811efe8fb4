//! Compressed gradient descent, `x' = x - eta C(grad f(x))`.
//!
//! Single-machine method: the whole gradient is compressed once per round.

use crate::compressors::Compressor;
use crate::objective::Objective;
use crate::rng::{StreamFactory, CHANNEL_GRADIENT};
use crate::scalar::Scalar;
use crate::vector::DenseVector;

use super::StepOutcome;

#[derive(Clone, Debug)]
pub struct CgdState<T> {
    pub x: DenseVector<T>,
    pub k: u64,
}

impl<T: Scalar> CgdState<T> {
    pub fn new(x0: DenseVector<T>) -> Self {
        Self { x: x0, k: 0 }
    }
}

pub fn cgd_step<T: Scalar>(
    state: &CgdState<T>,
    obj: &Objective<T>,
    comp: &Compressor,
    eta: T,
    streams: &StreamFactory,
) -> StepOutcome<CgdState<T>> {
    let grad = obj.grad_full(&state.x);
    let mut stream = streams.stream(0, state.k, CHANNEL_GRADIENT);
    let msg = comp.compress(&grad, &mut stream);
    let x_next = DenseVector::axpy(-eta, &msg.payload, &state.x);
    StepOutcome {
        state: CgdState {
            x: x_next,
            k: state.k + 1,
        },
        bits_sent: msg.bit_cost,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
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
    fn newton_step_on_identity_quadratic() {
        // f = x^2/2, x=1, eta=1, identity compressor: one exact step to 0
        let obj = quadratic(vec![1.0], vec![0.0]);
        let state = CgdState::new(DenseVector::from_vec(vec![1.0]));
        let out = cgd_step(
            &state,
            &obj,
            &Compressor::identity(1),
            1.0,
            &StreamFactory::new(0),
        );
        assert_eq!(out.state.x[0], 0.0);
        assert_eq!(out.bits_sent, 32.0);
    }

    #[test]
    fn stationary_point_is_fixed_for_any_compressor() {
        // grad = 0 at the optimum and C(0) = 0 for every kind
        let obj = quadratic(vec![2.0, 3.0], vec![2.0, -3.0]);
        let x_star = DenseVector::from_vec(vec![1.0, -1.0]);
        for comp in [
            Compressor::identity(2),
            Compressor::random_k(2, 1).unwrap(),
            Compressor::quantization(2, 2.0, 4).unwrap(),
            Compressor::natural(2),
        ] {
            let state = CgdState::new(x_star.clone());
            let out = cgd_step(&state, &obj, &comp, 0.1, &StreamFactory::new(7));
            assert_eq!(out.state.x, x_star, "{:?}", comp.kind());
        }
    }
}
