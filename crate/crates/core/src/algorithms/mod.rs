//! The five optimization methods with their exact update rules.
//!
//! Each method is a pure step function from `(state, objective, compressor,
//! schedule, derived streams)` to the next state plus the bits sent that
//! round. Per-node work inside a step may run in parallel; because every
//! node draws from its own keyed stream, the result is identical to a
//! sequential execution.

pub mod acgd;
pub mod adiana;
pub mod cgd;
pub mod dcgd;
pub mod diana;
pub mod schedule;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::scalar::Scalar;
use crate::vector::DenseVector;

pub use acgd::{acgd_step, AcgdState};
pub use adiana::{adiana_step, AdianaState};
pub use cgd::{cgd_step, CgdState};
pub use dcgd::{dcgd_step, DcgdState};
pub use diana::{diana_step, DianaState};
pub use schedule::{
    cgd_step_size, dcgd_step_size, AcgdMode, AcgdSchedule, AdianaSchedule, DianaParams,
    ScheduleError,
};

/// State after one iteration plus the total bits that crossed the wire
/// (summed over all node messages in the round).
#[derive(Clone, Debug)]
pub struct StepOutcome<S> {
    pub state: S,
    pub bits_sent: f64,
}

/// Method selection, matching the CLI strings
/// `cgd`, `acgd-cvx`, `acgd-scvx`, `dcgd`, `diana`, `adiana`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Cgd,
    AcgdConvex,
    AcgdStronglyConvex,
    Dcgd,
    Diana,
    Adiana,
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown method `{0}` (expected cgd, acgd-cvx, acgd-scvx, dcgd, diana, adiana)")]
pub struct MethodParseError(String);

impl FromStr for Method {
    type Err = MethodParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cgd" => Ok(Self::Cgd),
            "acgd-cvx" => Ok(Self::AcgdConvex),
            "acgd-scvx" => Ok(Self::AcgdStronglyConvex),
            "dcgd" => Ok(Self::Dcgd),
            "diana" => Ok(Self::Diana),
            "adiana" => Ok(Self::Adiana),
            _ => Err(MethodParseError(s.to_string())),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Cgd => "cgd",
            Self::AcgdConvex => "acgd-cvx",
            Self::AcgdStronglyConvex => "acgd-scvx",
            Self::Dcgd => "dcgd",
            Self::Diana => "diana",
            Self::Adiana => "adiana",
        };
        f.write_str(s)
    }
}

impl serde::Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Method {
    /// Methods defined on the single-machine problem (`n = 1`, `psi = 0`).
    pub fn is_single_machine(&self) -> bool {
        matches!(
            self,
            Self::Cgd | Self::AcgdConvex | Self::AcgdStronglyConvex
        )
    }
}

/// Resolved per-method parameters.
#[derive(Clone, Copy, Debug)]
pub enum Schedule<T> {
    Cgd { eta: T },
    Acgd(AcgdSchedule<T>),
    Dcgd { eta: T },
    Diana(DianaParams<T>),
    Adiana(AdianaSchedule<T>),
}

/// Builds the theoretical schedule for `method` from the problem constants.
pub fn build_schedule<T: Scalar>(
    method: Method,
    l: T,
    mu: T,
    omega: T,
    n: usize,
) -> Result<Schedule<T>, ScheduleError> {
    Ok(match method {
        Method::Cgd => Schedule::Cgd {
            eta: cgd_step_size(l, omega)?,
        },
        Method::AcgdConvex => Schedule::Acgd(AcgdSchedule::new(AcgdMode::Convex, l, mu, omega)?),
        Method::AcgdStronglyConvex => {
            Schedule::Acgd(AcgdSchedule::new(AcgdMode::StronglyConvex, l, mu, omega)?)
        }
        Method::Dcgd => Schedule::Dcgd {
            eta: dcgd_step_size(l, omega, n)?,
        },
        Method::Diana => Schedule::Diana(DianaParams::new(l, omega, n)?),
        Method::Adiana => Schedule::Adiana(AdianaSchedule::new(l, mu, omega, n)?),
    })
}

/// Mean of equally weighted vectors: sum in slice order, then scale by `1/n`.
pub(crate) fn mean_of<T: Scalar>(vs: &[DenseVector<T>]) -> DenseVector<T> {
    let mut acc = vs[0].clone();
    for v in &vs[1..] {
        acc.add_scaled(T::one(), v);
    }
    acc.scale(T::one() / T::from_count(vs.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_strings_round_trip() {
        for m in [
            Method::Cgd,
            Method::AcgdConvex,
            Method::AcgdStronglyConvex,
            Method::Dcgd,
            Method::Diana,
            Method::Adiana,
        ] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("sgd".parse::<Method>().is_err());
    }

    #[test]
    fn build_schedule_dispatches() {
        assert!(matches!(
            build_schedule::<f64>(Method::Cgd, 1.0, 0.0, 3.0, 1).unwrap(),
            Schedule::Cgd { eta } if eta == 0.25
        ));
        assert!(build_schedule::<f64>(Method::Adiana, 1.0, 0.0, 3.0, 4).is_err());
        assert!(build_schedule::<f64>(Method::AcgdStronglyConvex, 1.0, 0.0, 0.0, 1).is_err());
    }
}
