//! ADIANA: accelerated DIANA with a probabilistic anchor point.
//!
//! Four sequences plus per-node shifts. One iteration:
//! ```text
//! x_k = theta1 z_k + theta2 w_k + (1 - theta1 - theta2) y_k
//! per node i (two independent compressions):
//!   m_i = C_i(grad f_i(x_k) - h_i)      gradient message
//!   u_i = C_i(grad f_i(w_k) - h_i)      shift message
//! g     = (1/n) sum_i m_i + h
//! h_i'  = h_i + alpha u_i,   h' = h + alpha (1/n) sum_i u_i
//! y_k+1 = prox_{eta psi}(x_k - eta g)
//! z_k+1 = beta z_k + (1 - beta) x_k + (gamma/eta)(y_k+1 - x_k)
//! w_k+1 = y_k with probability p, else w_k   (one server-side draw)
//! ```
//! Both messages are charged to the bit meter by default; pass
//! `count_shift_messages = false` for single-message accounting.

use rayon::prelude::*;

use crate::compressors::Compressor;
use crate::objective::Objective;
use crate::rng::{StreamFactory, CHANNEL_GRADIENT, CHANNEL_SERVER, CHANNEL_SHIFT};
use crate::scalar::Scalar;
use crate::vector::DenseVector;

use super::schedule::AdianaSchedule;
use super::{mean_of, StepOutcome};

#[derive(Clone, Debug)]
pub struct AdianaState<T> {
    /// Extrapolation point used in the most recent step.
    pub x: DenseVector<T>,
    pub y: DenseVector<T>,
    pub z: DenseVector<T>,
    /// Anchor point, refreshed to `y_k` with probability `p`.
    pub w: DenseVector<T>,
    /// Per-node shifts `h_i`.
    pub shifts: Vec<DenseVector<T>>,
    /// Server aggregate `h = (1/n) sum_i h_i`, maintained incrementally.
    pub shift_mean: DenseVector<T>,
    pub k: u64,
}

impl<T: Scalar> AdianaState<T> {
    /// `z0 = y0 = w0 = x0`, shifts at zero.
    pub fn new(x0: DenseVector<T>, n: usize) -> Self {
        let d = x0.dim();
        Self {
            x: x0.clone(),
            y: x0.clone(),
            z: x0.clone(),
            w: x0,
            shifts: vec![DenseVector::zeros(d); n],
            shift_mean: DenseVector::zeros(d),
            k: 0,
        }
    }
}

pub fn adiana_step<T: Scalar>(
    state: &AdianaState<T>,
    obj: &Objective<T>,
    comp: &Compressor,
    sched: &AdianaSchedule<T>,
    streams: &StreamFactory,
    count_shift_messages: bool,
) -> StepOutcome<AdianaState<T>> {
    let n = obj.node_count();
    assert_eq!(state.shifts.len(), n);
    let k = state.k;
    let one = T::one();

    let x = DenseVector::linear_combination(&[
        (sched.theta1, &state.z),
        (sched.theta2, &state.w),
        (one - sched.theta1 - sched.theta2, &state.y),
    ]);

    // (m_i, u_i) per node; independent draws for the two messages
    let messages: Vec<(DenseVector<T>, DenseVector<T>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let h_i = &state.shifts[i];
            let grad_x = obj.grad_node(i, &x);
            let mut grad_stream = streams.stream(i as u32, k, CHANNEL_GRADIENT);
            let m_i = comp.compress(&grad_x.sub(h_i), &mut grad_stream).payload;
            let grad_w = obj.grad_node(i, &state.w);
            let mut shift_stream = streams.stream(i as u32, k, CHANNEL_SHIFT);
            let u_i = comp.compress(&grad_w.sub(h_i), &mut shift_stream).payload;
            (m_i, u_i)
        })
        .collect();

    let grad_messages: Vec<DenseVector<T>> = messages.iter().map(|(m, _)| m.clone()).collect();
    let shift_messages: Vec<DenseVector<T>> = messages.into_iter().map(|(_, u)| u).collect();

    let g = mean_of(&grad_messages).add(&state.shift_mean);
    let mean_shift_message = mean_of(&shift_messages);

    let shifts_next: Vec<DenseVector<T>> = state
        .shifts
        .iter()
        .zip(shift_messages.iter())
        .map(|(h, u)| DenseVector::axpy(sched.alpha, u, h))
        .collect();
    let shift_mean_next = DenseVector::axpy(sched.alpha, &mean_shift_message, &state.shift_mean);

    let y_next = obj.prox(sched.eta, &DenseVector::axpy(-sched.eta, &g, &x));
    let z_next = DenseVector::linear_combination(&[
        (sched.beta, &state.z),
        (one - sched.beta, &x),
        (sched.gamma / sched.eta, &y_next.sub(&x)),
    ]);

    // single server-side draw shared by all nodes
    let mut server = streams.stream(0, k, CHANNEL_SERVER);
    let w_next = if server.draw_bernoulli(sched.p.to_f64_lossy()) {
        state.y.clone()
    } else {
        state.w.clone()
    };

    let messages_per_node = if count_shift_messages { 2.0 } else { 1.0 };
    StepOutcome {
        state: AdianaState {
            x,
            y: y_next,
            z: z_next,
            w: w_next,
            shifts: shifts_next,
            shift_mean: shift_mean_next,
            k: k + 1,
        },
        bits_sent: comp.bit_cost() * messages_per_node * n as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::schedule::AdianaSchedule;
    use crate::objective::{QuadraticLoss, Regularizer, SmoothLoss};

    fn quadratic_nodes(specs: &[([f64; 2], [f64; 2])]) -> Objective<f64> {
        Objective::new(
            specs
                .iter()
                .map(|(diag, b)| {
                    SmoothLoss::Quadratic(QuadraticLoss::diagonal(
                        DenseVector::from_vec(diag.to_vec()),
                        DenseVector::from_vec(b.to_vec()),
                    ))
                })
                .collect(),
            Regularizer::Zero,
        )
        .unwrap()
    }

    #[test]
    fn no_compression_single_node_uses_exact_gradients() {
        // omega=0, n=1, psi=0, h0=0: g_k = grad f(x_k) exactly at every step
        let obj = quadratic_nodes(&[([1.0, 0.5], [0.2, -0.1])]);
        let sched = AdianaSchedule::new(1.0, 0.5, 0.0, 1).unwrap();
        let comp = Compressor::identity(2);
        let streams = StreamFactory::new(5);
        let mut state = AdianaState::new(DenseVector::from_vec(vec![1.0, 1.0]), 1);
        for _ in 0..50 {
            let x_next = DenseVector::linear_combination(&[
                (sched.theta1, &state.z),
                (sched.theta2, &state.w),
                (1.0 - sched.theta1 - sched.theta2, &state.y),
            ]);
            let expected_g = obj.grad_full(&x_next);
            let out = adiana_step(&state, &obj, &comp, &sched, &streams, true);
            // reconstruct g from the y-update: y' = x - eta g
            let mut g = DenseVector::zeros(2);
            g.add_scaled(1.0 / sched.eta, &out.state.x.sub(&out.state.y));
            assert!(g.dist(&expected_g) <= 1e-12);
            state = out.state;
        }
        assert!(state.x.is_finite());
    }

    #[test]
    fn bit_accounting_counts_both_messages_by_default() {
        let obj = quadratic_nodes(&[([1.0, 0.5], [0.0, 0.0]), ([0.5, 1.0], [0.1, 0.1])]);
        let sched = AdianaSchedule::new(1.0, 0.25, 3.0, 2).unwrap();
        let comp = Compressor::random_k(2, 1).unwrap();
        let state = AdianaState::new(DenseVector::zeros(2), 2);
        let streams = StreamFactory::new(2);
        let both = adiana_step(&state, &obj, &comp, &sched, &streams, true);
        assert_eq!(both.bits_sent, 2.0 * 2.0 * 32.0);
        let single = adiana_step(&state, &obj, &comp, &sched, &streams, false);
        assert_eq!(single.bits_sent, 2.0 * 32.0);
    }

    #[test]
    fn anchor_takes_previous_y_not_the_new_one() {
        // with p = 1 the anchor w_{k+1} must equal y_k (the pre-update y)
        let obj = quadratic_nodes(&[([1.0, 0.5], [0.2, -0.1])]);
        let sched = AdianaSchedule::new(1.0, 0.5, 0.0, 1).unwrap();
        assert_eq!(sched.p, 1.0);
        let comp = Compressor::identity(2);
        let streams = StreamFactory::new(9);
        let mut state = AdianaState::new(DenseVector::from_vec(vec![2.0, -1.0]), 1);
        for _ in 0..5 {
            let y_before = state.y.clone();
            let out = adiana_step(&state, &obj, &comp, &sched, &streams, true);
            assert_eq!(out.state.w, y_before);
            state = out.state;
        }
    }

    #[test]
    fn shift_mean_identity_holds_along_a_run() {
        let obj = quadratic_nodes(&[([1.0, 2.0], [0.5, 0.0]), ([2.0, 1.0], [0.0, 0.5])]);
        let sched = AdianaSchedule::new(2.0, 0.1, 1.0, 2).unwrap();
        let comp = Compressor::random_k(2, 1).unwrap();
        let streams = StreamFactory::new(13);
        let mut state = AdianaState::new(DenseVector::from_vec(vec![1.5, -0.5]), 2);
        for _ in 0..500 {
            state = adiana_step(&state, &obj, &comp, &sched, &streams, true).state;
            let recomputed = super::mean_of(&state.shifts);
            assert!(state.shift_mean.dist(&recomputed) <= 1e-12);
        }
    }
}
