//! Theoretical parameter schedules for every method.
//!
//! All step sizes and momentum parameters are the closed forms the
//! convergence analysis prescribes, evaluated from `(L, mu, omega, n)`;
//! nothing is tuned.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("smoothness constant must be positive, got {0}")]
    NonPositiveSmoothness(f64),
    #[error("strongly convex ACGD needs mu > 0; use acgd-cvx for the convex schedule")]
    AcgdNeedsStrongConvexity,
    #[error("adiana's schedule is defined for mu > 0 only")]
    AdianaNeedsStrongConvexity,
    #[error("schedule violates the step-feasibility conditions at iteration {0}")]
    Infeasible(u64),
}

/// ACGD mode: which of the two parameter schedules to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AcgdMode {
    Convex,
    StronglyConvex,
}

/// Parameters of the accelerated single-machine method.
///
/// Both modes fix `eta = 1/L` and `p = 1 + omega`. The strongly convex
/// schedule is constant:
/// `theta = p/(p + sqrt(mu/L))`, `beta = sqrt(mu/L)/p`, `gamma = sqrt(mu/L)`;
/// the convex schedule is iteration-indexed:
/// `theta_k = k/(k+2)`, `beta_k = 0`, `gamma_k = 2p/(k+2)`.
#[derive(Clone, Copy, Debug)]
pub struct AcgdSchedule<T> {
    pub mode: AcgdMode,
    pub eta: T,
    pub p: T,
    l: T,
    mu: T,
    omega: T,
}

impl<T: Scalar> AcgdSchedule<T> {
    pub fn new(mode: AcgdMode, l: T, mu: T, omega: T) -> Result<Self, ScheduleError> {
        if !l.is_finite() || l <= T::zero() {
            return Err(ScheduleError::NonPositiveSmoothness(l.to_f64_lossy()));
        }
        if mode == AcgdMode::StronglyConvex && (!mu.is_finite() || mu <= T::zero()) {
            return Err(ScheduleError::AcgdNeedsStrongConvexity);
        }
        let mu = if mode == AcgdMode::Convex {
            T::zero()
        } else {
            mu
        };
        Ok(Self {
            mode,
            eta: T::one() / l,
            p: T::one() + omega,
            l,
            mu,
            omega,
        })
    }

    pub fn theta(&self, k: u64) -> T {
        match self.mode {
            AcgdMode::StronglyConvex => self.p / (self.p + (self.mu / self.l).sqrt()),
            AcgdMode::Convex => T::from_count(k as usize) / T::from_count(k as usize + 2),
        }
    }

    pub fn beta(&self, k: u64) -> T {
        let _ = k;
        match self.mode {
            AcgdMode::StronglyConvex => (self.mu / self.l).sqrt() / self.p,
            AcgdMode::Convex => T::zero(),
        }
    }

    pub fn gamma(&self, k: u64) -> T {
        match self.mode {
            AcgdMode::StronglyConvex => (self.mu / self.l).sqrt(),
            AcgdMode::Convex => T::two() * self.p / T::from_count(k as usize + 2),
        }
    }

    /// Per-step contraction factor of the strongly convex potential,
    /// `1 - sqrt(mu/L) / (1 + omega)`.
    pub fn strongly_convex_rate(&self) -> T {
        T::one() - (self.mu / self.l).sqrt() / self.p
    }

    /// Checks the one-iteration feasibility conditions at iteration `k`:
    /// `theta_k = (1 - gamma_k/p) / (1 - beta_k gamma_k / p)`,
    /// `beta_k <= min(mu eta / (gamma_k p), 1)`, and
    /// `p >= (1 + L eta)(1 + omega) / 2`.
    pub fn feasible_at(&self, k: u64) -> bool {
        let tol = T::from_config(1e-9);
        let theta = self.theta(k);
        let beta = self.beta(k);
        let gamma = self.gamma(k);
        let theta_req = (T::one() - gamma / self.p) / (T::one() - beta * gamma / self.p);
        if (theta - theta_req).abs() > tol * theta_req.abs().max(T::one()) {
            return false;
        }
        let beta_cap = (self.mu * self.eta / (gamma * self.p)).min(T::one());
        if beta > beta_cap + tol {
            return false;
        }
        let p_req = (T::one() + self.l * self.eta) * (T::one() + self.omega) / T::two();
        self.p + tol >= p_req
    }

    pub fn validate(&self, horizon: u64) -> Result<(), ScheduleError> {
        for k in 0..horizon {
            if !self.feasible_at(k) {
                return Err(ScheduleError::Infeasible(k));
            }
        }
        Ok(())
    }
}

/// Parameters of the accelerated distributed method.
///
/// With `kappa = L/mu` and `n` nodes:
/// `p    = min(1, max(1, sqrt(n/(32 omega)) - 1) / (2(1+omega)))`   (`p = 1` at `omega = 0`),
/// `eta  = min(1/(2L), n / (64 omega (2p(omega+1) + 1)^2 L))`       (first branch at `omega = 0`),
/// `theta1 = min(1/4, sqrt(eta mu / p))`, `theta2 = 1/2`,
/// `alpha = 1/(omega+1)`, `gamma = eta / (2(theta1 + eta mu))`, `beta = 1 - gamma mu`.
#[derive(Clone, Copy, Debug)]
pub struct AdianaSchedule<T> {
    pub eta: T,
    pub theta1: T,
    pub theta2: T,
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    pub p: T,
    pub omega: T,
    pub n: usize,
}

impl<T: Scalar> AdianaSchedule<T> {
    pub fn new(l: T, mu: T, omega: T, n: usize) -> Result<Self, ScheduleError> {
        Self::build(l, mu, omega, n, None)
    }

    /// Same schedule with a custom step size; the dependent parameters
    /// `theta1`, `gamma`, `beta` are recomputed from it.
    pub fn with_eta(l: T, mu: T, omega: T, n: usize, eta: T) -> Result<Self, ScheduleError> {
        Self::build(l, mu, omega, n, Some(eta))
    }

    fn build(
        l: T,
        mu: T,
        omega: T,
        n: usize,
        eta_override: Option<T>,
    ) -> Result<Self, ScheduleError> {
        if !l.is_finite() || l <= T::zero() {
            return Err(ScheduleError::NonPositiveSmoothness(l.to_f64_lossy()));
        }
        if !mu.is_finite() || mu <= T::zero() {
            return Err(ScheduleError::AdianaNeedsStrongConvexity);
        }
        let one = T::one();
        let two = T::two();
        let four = two * two;
        let n_t = T::from_count(n);

        let p = if omega == T::zero() {
            one
        } else {
            let inner = (n_t / (T::from_config(32.0) * omega)).sqrt() - one;
            (inner.max(one) / (two * (one + omega))).min(one)
        };
        let eta = eta_override.unwrap_or_else(|| {
            if omega == T::zero() {
                one / (two * l)
            } else {
                let denom_core = two * p * (omega + one) + one;
                let second = n_t / (T::from_config(64.0) * omega * denom_core * denom_core * l);
                (one / (two * l)).min(second)
            }
        });
        let theta1 = (one / four).min((eta * mu / p).sqrt());
        let theta2 = one / two;
        let alpha = one / (omega + one);
        let gamma = eta / (two * (theta1 + eta * mu));
        let beta = one - gamma * mu;

        debug_assert!(p > T::zero() && p <= one);
        debug_assert!(theta1 > T::zero() && theta1 <= one / four);
        debug_assert!(theta1 + theta2 <= one);
        debug_assert!(beta > T::zero() && beta <= one);

        Ok(Self {
            eta,
            theta1,
            theta2,
            alpha,
            beta,
            gamma,
            p,
            omega,
            n,
        })
    }

    /// Guaranteed per-step contraction of the composite potential:
    /// `min(alpha/4, p/8, sqrt(eta mu p)/4)` given `beta = 1 - gamma mu`.
    pub fn contraction_rate(&self) -> T {
        let four = T::two() * T::two();
        let eight = four * T::two();
        let mu = (T::one() - self.beta) / self.gamma;
        (self.alpha / four)
            .min(self.p / eight)
            .min((self.eta * mu * self.p).sqrt() / four)
    }
}

/// DIANA step size and shift rate.
///
/// The shift rate is `alpha = 1/(1+omega)`; the step size uses the safe
/// distributed choice `eta = 1 / ((1 + 2 omega / n) L)`, overridable per run.
#[derive(Clone, Copy, Debug)]
pub struct DianaParams<T> {
    pub eta: T,
    pub alpha: T,
}

impl<T: Scalar> DianaParams<T> {
    pub fn new(l: T, omega: T, n: usize) -> Result<Self, ScheduleError> {
        if !l.is_finite() || l <= T::zero() {
            return Err(ScheduleError::NonPositiveSmoothness(l.to_f64_lossy()));
        }
        Ok(Self {
            eta: T::one() / ((T::one() + T::two() * omega / T::from_count(n)) * l),
            alpha: T::one() / (T::one() + omega),
        })
    }
}

/// CGD step size, `eta = 1/((1+omega) L)`.
pub fn cgd_step_size<T: Scalar>(l: T, omega: T) -> Result<T, ScheduleError> {
    if !l.is_finite() || l <= T::zero() {
        return Err(ScheduleError::NonPositiveSmoothness(l.to_f64_lossy()));
    }
    Ok(T::one() / ((T::one() + omega) * l))
}

/// DCGD step size; same safe distributed choice as DIANA.
pub fn dcgd_step_size<T: Scalar>(l: T, omega: T, n: usize) -> Result<T, ScheduleError> {
    Ok(DianaParams::new(l, omega, n)?.eta)
}
