//! Deterministic, key-derived random streams.
//!
//! Every consumer of randomness names a `(node, iteration, channel)` key and
//! derives an independent ChaCha8 stream from the master seed. Streams are
//! never shared, so the draws for a key are identical no matter how calls
//! interleave or on how many threads the simulation runs.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

/// Channel for gradient-message compression draws.
pub const CHANNEL_GRADIENT: u32 = 0;
/// Channel for shift-message compression draws.
pub const CHANNEL_SHIFT: u32 = 1;
/// Channel for the server-side Bernoulli anchor update.
pub const CHANNEL_SERVER: u32 = 2;
/// Channel for dataset partition shuffling.
pub const CHANNEL_PARTITION: u32 = 3;

/// Identifies one independent stream under a master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub node: u32,
    pub iteration: u64,
    pub channel: u32,
}

// splitmix64 finalizer over (state ^ scrambled input).
fn mix(state: u64, input: u64) -> u64 {
    let mut z = state ^ input.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One deterministic random stream.
#[derive(Clone, Debug)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, key: StreamKey) -> Self {
        let mut h = mix(master_seed, 0x636f_6d70_6772_6164); // "compgrad"
        h = mix(h, key.node as u64);
        h = mix(h, key.iteration);
        h = mix(h, key.channel as u64);
        let mut seed = [0u8; 32];
        let mut s = h;
        for chunk in seed.chunks_exact_mut(8) {
            s = mix(s, 0x5bd1_e995);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        Self {
            rng: ChaCha8Rng::from_seed(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    pub fn draw_uniform<T: Scalar>(&mut self) -> T {
        let u = ((self.next_u64() >> 11) as f64) * (1.0 / (1u64 << 53) as f64);
        let v = T::from_config(u);
        // f32 can round the top of the range up to 1.0.
        if v >= T::one() {
            T::one() - T::epsilon()
        } else {
            v
        }
    }

    /// Unbiased uniform index in `[0, n)`.
    pub fn draw_index(&mut self, n: usize) -> usize {
        assert!(n > 0, "draw_index needs a nonempty range");
        let n = n as u64;
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let r = self.next_u64();
            if r < zone {
                return (r % n) as usize;
            }
        }
    }

    /// Bernoulli draw with success probability `p`.
    pub fn draw_bernoulli(&mut self, p: f64) -> bool {
        debug_assert!((0.0..=1.0).contains(&p));
        self.draw_uniform::<f64>() < p
    }

    /// Uniformly random `k`-subset of `{0, .., d-1}`, returned sorted.
    ///
    /// Partial Fisher-Yates; every subset has probability `1 / C(d, k)`.
    pub fn draw_subset(&mut self, d: usize, k: usize) -> Vec<usize> {
        assert!(k >= 1 && k <= d, "subset size must satisfy 1 <= k <= d");
        let mut pool: Vec<usize> = (0..d).collect();
        for i in 0..k {
            let j = i + self.draw_index(d - i);
            pool.swap(i, j);
        }
        let mut subset = pool[..k].to_vec();
        subset.sort_unstable();
        subset
    }
}

/// Derives per-key streams from a single master seed.
#[derive(Clone, Copy, Debug)]
pub struct StreamFactory {
    master_seed: u64,
}

impl StreamFactory {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream(&self, node: u32, iteration: u64, channel: u32) -> RngStream {
        RngStream::new(
            self.master_seed,
            StreamKey {
                node,
                iteration,
                channel,
            },
        )
    }
}
