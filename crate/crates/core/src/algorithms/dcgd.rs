//! Distributed compressed gradient descent.
//!
//! Each node compresses its local gradient, the server averages the payloads
//! and takes a proximal gradient step:
//! `x' = prox_{eta psi}(x - eta (1/n) sum_i C_i(grad f_i(x)))`.

use rayon::prelude::*;

use crate::compressors::Compressor;
use crate::objective::Objective;
use crate::rng::{StreamFactory, CHANNEL_GRADIENT};
use crate::scalar::Scalar;
use crate::vector::DenseVector;

use super::{mean_of, StepOutcome};

#[derive(Clone, Debug)]
pub struct DcgdState<T> {
    pub x: DenseVector<T>,
    pub k: u64,
}

impl<T: Scalar> DcgdState<T> {
    pub fn new(x0: DenseVector<T>) -> Self {
        Self { x: x0, k: 0 }
    }
}

pub fn dcgd_step<T: Scalar>(
    state: &DcgdState<T>,
    obj: &Objective<T>,
    comp: &Compressor,
    eta: T,
    streams: &StreamFactory,
) -> StepOutcome<DcgdState<T>> {
    let n = obj.node_count();
    let k = state.k;
    let payloads: Vec<DenseVector<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let grad = obj.grad_node(i, &state.x);
            let mut stream = streams.stream(i as u32, k, CHANNEL_GRADIENT);
            comp.compress(&grad, &mut stream).payload
        })
        .collect();
    let g = mean_of(&payloads);
    let x_next = obj.prox(eta, &DenseVector::axpy(-eta, &g, &state.x));
    StepOutcome {
        state: DcgdState {
            x: x_next,
            k: k + 1,
        },
        bits_sent: comp.bit_cost() * n as f64,
    }
}
