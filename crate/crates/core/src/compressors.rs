//! Unbiased randomized compression operators with fixed bit-cost accounting.
//!
//! Every operator `C` here is unbiased, `E[C(x)] = x`, with relative variance
//! bound `E||C(x) - x||^2 <= omega * ||x||^2`. The variance parameter `omega`
//! and the per-message bit cost are closed forms of the configuration alone:
//!
//! | kind                | omega                       | bits per message |
//! |---------------------|-----------------------------|------------------|
//! | identity            | 0                           | 32 d             |
//! | random-k            | d/k - 1                     | 32 k             |
//! | (p,s)-quantization  | 2 + (d^(1/p) + d^(1/2)) / s | 2.8 d + 32       |
//! | natural             | 1/8 (configurable)          | 9 d              |
//!
//! Bit costs are charged as fixed real-valued budgets per message; no actual
//! bitstream is produced. The quantization charge corresponds to the
//! `s = floor(sqrt(d))` coding estimate and is applied for every `s`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::vector::DenseVector;

/// Variance parameter of natural compression (power-of-two randomized
/// rounding); the standard value for this operator, overridable per run.
pub const NATURAL_OMEGA_DEFAULT: f64 = 0.125;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CompressorKind {
    /// No compression; `C(x) = x`.
    Identity,
    /// Keep `k` uniformly chosen coordinates, rescale by `d/k`.
    RandomK { k: usize },
    /// Random dithering of coordinate magnitudes onto `s` levels of `||x||_p`.
    Quantization { p: f64, s: u32 },
    /// Randomized rounding of each coordinate to a neighboring power of two.
    Natural { omega: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum CompressorError {
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("random-k needs 1 <= k <= d, got k={k} with d={d}")]
    BadSparsity { k: usize, d: usize },
    #[error("quantization needs s >= 1 and p >= 1, got s={s}, p={p}")]
    BadQuantization { s: u32, p: f64 },
    #[error("natural compression variance must be nonnegative, got {0}")]
    BadNaturalOmega(f64),
}

/// A configured compression operator for vectors of a fixed dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Compressor {
    kind: CompressorKind,
    dim: usize,
}

/// Result of compressing one vector: the decoded payload plus the fixed
/// number of bits charged for transmitting it.
#[derive(Clone, Debug)]
pub struct CompressedMessage<T> {
    pub payload: DenseVector<T>,
    pub bit_cost: f64,
}

impl Compressor {
    pub fn new(kind: CompressorKind, dim: usize) -> Result<Self, CompressorError> {
        if dim == 0 {
            return Err(CompressorError::ZeroDimension);
        }
        match kind {
            CompressorKind::RandomK { k } if k == 0 || k > dim => {
                return Err(CompressorError::BadSparsity { k, d: dim })
            }
            CompressorKind::Quantization { p, s } if s == 0 || !p.is_finite() || p < 1.0 => {
                return Err(CompressorError::BadQuantization { s, p })
            }
            CompressorKind::Natural { omega } if !omega.is_finite() || omega < 0.0 => {
                return Err(CompressorError::BadNaturalOmega(omega))
            }
            _ => {}
        }
        Ok(Self { kind, dim })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(CompressorKind::Identity, dim).expect("valid identity compressor")
    }

    pub fn random_k(dim: usize, k: usize) -> Result<Self, CompressorError> {
        Self::new(CompressorKind::RandomK { k }, dim)
    }

    pub fn quantization(dim: usize, p: f64, s: u32) -> Result<Self, CompressorError> {
        Self::new(CompressorKind::Quantization { p, s }, dim)
    }

    pub fn natural(dim: usize) -> Self {
        Self::new(
            CompressorKind::Natural {
                omega: NATURAL_OMEGA_DEFAULT,
            },
            dim,
        )
        .expect("valid natural compressor")
    }

    pub fn kind(&self) -> CompressorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Variance parameter `omega` of the operator.
    pub fn omega(&self) -> f64 {
        let d = self.dim as f64;
        match self.kind {
            CompressorKind::Identity => 0.0,
            CompressorKind::RandomK { k } => d / k as f64 - 1.0,
            CompressorKind::Quantization { p, s } => 2.0 + (d.powf(1.0 / p) + d.sqrt()) / s as f64,
            CompressorKind::Natural { omega } => omega,
        }
    }

    /// Fixed bits charged for one compressed message of this kind.
    pub fn bit_cost(&self) -> f64 {
        let d = self.dim as f64;
        match self.kind {
            CompressorKind::Identity => 32.0 * d,
            CompressorKind::RandomK { k } => 32.0 * k as f64,
            CompressorKind::Quantization { .. } => 2.8 * d + 32.0,
            CompressorKind::Natural { .. } => 9.0 * d,
        }
    }

    /// Applies the operator to `x` using draws from `stream`.
    pub fn compress<T: Scalar>(
        &self,
        x: &DenseVector<T>,
        stream: &mut RngStream,
    ) -> CompressedMessage<T> {
        assert_eq!(x.dim(), self.dim, "compressor dimension mismatch");
        assert!(x.is_finite(), "cannot compress non-finite input");
        let payload = match self.kind {
            CompressorKind::Identity => x.clone(),
            CompressorKind::RandomK { k } => random_k(x, k, stream),
            CompressorKind::Quantization { p, s } => quantize(x, p, s, stream),
            CompressorKind::Natural { .. } => natural(x, stream),
        };
        CompressedMessage {
            payload,
            bit_cost: self.bit_cost(),
        }
    }
}

fn random_k<T: Scalar>(x: &DenseVector<T>, k: usize, stream: &mut RngStream) -> DenseVector<T> {
    let d = x.dim();
    let scale = T::from_count(d) / T::from_count(k);
    let mut out = vec![T::zero(); d];
    for idx in stream.draw_subset(d, k) {
        out[idx] = scale * x[idx];
    }
    DenseVector::from_vec(out)
}

fn quantize<T: Scalar>(
    x: &DenseVector<T>,
    p: f64,
    s: u32,
    stream: &mut RngStream,
) -> DenseVector<T> {
    let norm = x.norm_p(T::from_config(p));
    if norm == T::zero() {
        return DenseVector::zeros(x.dim());
    }
    let s_t = T::from_config(s as f64);
    let mut out = Vec::with_capacity(x.dim());
    for xi in x.iter() {
        let t = xi.abs() * s_t / norm;
        let level = t.floor();
        let frac = t - level;
        let u: T = stream.draw_uniform();
        // frac == 0 (coordinate exactly at a level) never rounds up.
        let xi_s = if u < frac { level + T::one() } else { level };
        out.push(xi.signum() * norm * xi_s / s_t);
    }
    DenseVector::from_vec(out)
}

fn natural<T: Scalar>(x: &DenseVector<T>, stream: &mut RngStream) -> DenseVector<T> {
    let mut out = Vec::with_capacity(x.dim());
    for xi in x.iter() {
        let u: T = stream.draw_uniform();
        if *xi == T::zero() {
            out.push(T::zero());
            continue;
        }
        let a = xi.abs();
        // low = 2^floor(log2 a), corrected against log2 rounding at boundaries.
        let mut low = a.log2().floor().exp2();
        while low > a {
            low *= T::half();
        }
        while low * T::two() <= a {
            low *= T::two();
        }
        debug_assert!(low <= a && a < low * T::two());

        let frac = a / low - T::one();
        let mag = if u < frac { low * T::two() } else { low };
        out.push(xi.signum() * mag);
    }
    DenseVector::from_vec(out)
}

/// Compressor selection in the CLI string grammar:
/// `identity`, `randk[:<r>]`, `dithering[:<s>]`, `natural`.
///
/// `randk` defaults to `r = max(1, floor(d/4))`, `dithering` to
/// `s = floor(sqrt(d))`; dithering always uses `p = 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompressorSpec {
    Identity,
    RandomK(Option<usize>),
    Dithering(Option<u32>),
    Natural,
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown compressor `{0}` (expected identity, randk[:<r>], dithering[:<s>], natural)")]
pub struct CompressorSpecParseError(String);

impl FromStr for CompressorSpec {
    type Err = CompressorSpecParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CompressorSpecParseError(s.to_string());
        match s.split_once(':') {
            None => match s {
                "identity" => Ok(Self::Identity),
                "randk" => Ok(Self::RandomK(None)),
                "dithering" => Ok(Self::Dithering(None)),
                "natural" => Ok(Self::Natural),
                _ => Err(bad()),
            },
            Some(("randk", arg)) => {
                let r = arg.parse().map_err(|_| bad())?;
                Ok(Self::RandomK(Some(r)))
            }
            Some(("dithering", arg)) => {
                let s_levels = arg.parse().map_err(|_| bad())?;
                Ok(Self::Dithering(Some(s_levels)))
            }
            Some(_) => Err(bad()),
        }
    }
}

impl fmt::Display for CompressorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompressorSpec::Identity => write!(f, "identity"),
            CompressorSpec::RandomK(None) => write!(f, "randk"),
            CompressorSpec::RandomK(Some(r)) => write!(f, "randk:{r}"),
            CompressorSpec::Dithering(None) => write!(f, "dithering"),
            CompressorSpec::Dithering(Some(s)) => write!(f, "dithering:{s}"),
            CompressorSpec::Natural => write!(f, "natural"),
        }
    }
}

impl CompressorSpec {
    /// Default sparsity `r = max(1, floor(d/4))`.
    pub fn default_randk(d: usize) -> usize {
        (d / 4).max(1)
    }

    /// Default dithering levels `s = floor(sqrt(d))`.
    pub fn default_dithering(d: usize) -> u32 {
        (d as f64).sqrt().floor().max(1.0) as u32
    }

    /// Resolves the spec against a concrete dimension.
    pub fn build(&self, d: usize) -> Result<Compressor, CompressorError> {
        self.build_with_natural_omega(d, NATURAL_OMEGA_DEFAULT)
    }

    pub fn build_with_natural_omega(
        &self,
        d: usize,
        natural_omega: f64,
    ) -> Result<Compressor, CompressorError> {
        match self {
            Self::Identity => Ok(Compressor::identity(d)),
            Self::RandomK(r) => {
                Compressor::random_k(d, r.unwrap_or_else(|| Self::default_randk(d)))
            }
            Self::Dithering(s) => {
                Compressor::quantization(d, 2.0, s.unwrap_or_else(|| Self::default_dithering(d)))
            }
            Self::Natural => Compressor::new(
                CompressorKind::Natural {
                    omega: natural_omega,
                },
                d,
            ),
        }
    }
}

impl serde::Serialize for CompressorSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for CompressorSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
