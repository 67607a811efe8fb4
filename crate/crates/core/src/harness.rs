//! Experiment orchestration on the simulated multi-node topology:
//! reference-optimum solve, iteration loop, exact bit metering, trace
//! recording and Lyapunov diagnostics.
//!
//! A run is a pure function of its [`ExperimentSpec`]: the same resolved spec
//! produces byte-identical trace CSVs regardless of thread count.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::{
    acgd_step, adiana_step, build_schedule, cgd_step, dcgd_step, diana_step, AcgdState,
    AdianaSchedule, AdianaState, CgdState, DcgdState, DianaParams, DianaState, Method, Schedule,
    ScheduleError,
};
use crate::compressors::{Compressor, CompressorError, CompressorSpec, NATURAL_OMEGA_DEFAULT};
use crate::dataset::{parse_libsvm, DatasetError, PartitionScheme, SparseDataset};
use crate::objective::{logistic_objective, Objective, ObjectiveError, Regularizer};
use crate::rng::StreamFactory;
use crate::scalar::Scalar;
use crate::vector::DenseVector;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Compressor(#[from] CompressorError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// How samples are spread over nodes; `shuffled` uses the experiment seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionKind {
    Contiguous,
    Shuffled,
}

impl std::str::FromStr for PartitionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "contiguous" => Ok(Self::Contiguous),
            "shuffled" => Ok(Self::Shuffled),
            other => Err(format!(
                "unknown partition scheme `{other}` (expected contiguous or shuffled)"
            )),
        }
    }
}

/// Iteration and/or cumulative-bit budget; the run stops at whichever is hit
/// first. At least one limit must be set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub max_iters: Option<u64>,
    pub max_bits: Option<f64>,
}

impl Budget {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.max_iters.is_none() && self.max_bits.is_none() {
            return Err(HarnessError::Config(
                "budget requires max_iters and/or max_bits".into(),
            ));
        }
        if self.max_iters == Some(0) {
            return Err(HarnessError::Config("max_iters must be positive".into()));
        }
        if matches!(self.max_bits, Some(b) if !b.is_finite() || b <= 0.0) {
            return Err(HarnessError::Config("max_bits must be positive".into()));
        }
        Ok(())
    }
}

/// Optional departures from the theoretical defaults.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Overrides {
    /// Step size override (replaces the theoretical step size).
    pub eta: Option<f64>,
    /// Shift rate override for diana/adiana.
    pub alpha: Option<f64>,
    /// Variance parameter assumed for natural compression.
    pub natural_omega: Option<f64>,
    /// Charge adiana's shift message to the bit meter (default true).
    pub count_shift_message: Option<bool>,
    /// Record every `trace_every`-th iteration instead of the automatic
    /// thinning rule.
    pub trace_every: Option<u64>,
    /// Multiply per-round bits by the node count (default false; matches
    /// fixed-node-count comparisons).
    pub multiply_bits_by_nodes: Option<bool>,
}

/// A fully specified single experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub method: Method,
    pub compressor: CompressorSpec,
    pub dataset: PathBuf,
    pub nodes: usize,
    /// Ridge weight folded into the smooth losses.
    pub lambda: f64,
    /// Optional l1 weight; enables the proximal path (`psi = l1 ||x||_1`).
    #[serde(default)]
    pub l1: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub max_iters: Option<u64>,
    #[serde(default)]
    pub max_bits: Option<f64>,
    pub partition: PartitionKind,
    #[serde(default)]
    pub diagnostics: bool,
    #[serde(default)]
    pub overrides: Overrides,
}

impl ExperimentSpec {
    pub fn budget(&self) -> Budget {
        Budget {
            max_iters: self.max_iters,
            max_bits: self.max_bits,
        }
    }
}

/// Everything the iteration loop needs about how to run and record.
#[derive(Clone, Copy, Debug)]
pub struct RunSettings {
    pub budget: Budget,
    pub diagnostics: bool,
    pub trace_every: Option<u64>,
    pub multiply_bits_by_nodes: bool,
    pub count_shift_messages: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            budget: Budget::default(),
            diagnostics: false,
            trace_every: None,
            multiply_bits_by_nodes: false,
            count_shift_messages: true,
        }
    }
}

/// One row of the convergence trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub iter: u64,
    pub bits: f64,
    pub f_gap: f64,
    pub grad_norm: f64,
    pub dist_opt: f64,
    pub lyapunov: Option<LyapunovValues>,
}

/// Lyapunov components in trace form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovValues {
    pub z: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub psi: f64,
}

/// Lyapunov components of an adiana state relative to the reference optimum:
/// `Z = ||z - x*||^2`, `Y = P(y) - P(x*)`, `W = P(w) - P(x*)`,
/// `H = (1/n) sum_i ||h_i - grad f_i(w)||^2`, and the weighted sum
/// `Psi = Z + (2 gamma beta / theta1) Y
///        + (2 gamma beta theta2 (1 + theta1) / (theta1 p)) W
///        + (8 gamma eta omega / (alpha theta1 n)) H`.
#[derive(Clone, Copy, Debug)]
pub struct LyapunovSnapshot<T> {
    pub z: T,
    pub y: T,
    pub w: T,
    pub h: T,
    pub psi: T,
}

impl<T: Scalar> LyapunovSnapshot<T> {
    pub fn values(&self) -> LyapunovValues {
        LyapunovValues {
            z: self.z.to_f64_lossy(),
            y: self.y.to_f64_lossy(),
            w: self.w.to_f64_lossy(),
            h: self.h.to_f64_lossy(),
            psi: self.psi.to_f64_lossy(),
        }
    }
}

pub fn lyapunov_snapshot<T: Scalar>(
    state: &AdianaState<T>,
    obj: &Objective<T>,
    x_star: &DenseVector<T>,
    f_star: T,
    sched: &AdianaSchedule<T>,
) -> LyapunovSnapshot<T> {
    let n = obj.node_count();
    let z = state.z.dist_sq(x_star);
    let y = obj.value(&state.y) - f_star;
    let w = obj.value(&state.w) - f_star;
    let mut h = T::zero();
    for (i, h_i) in state.shifts.iter().enumerate() {
        h += h_i.dist_sq(&obj.grad_node(i, &state.w));
    }
    h = h / T::from_count(n);

    let two = T::two();
    let eight = two * two * two;
    let y_coeff = two * sched.gamma * sched.beta / sched.theta1;
    let w_coeff = two * sched.gamma * sched.beta * sched.theta2 * (T::one() + sched.theta1)
        / (sched.theta1 * sched.p);
    let h_coeff = eight * sched.gamma * sched.eta * sched.omega
        / (sched.alpha * sched.theta1 * T::from_count(n));
    let psi = z + y_coeff * y + w_coeff * w + h_coeff * h;
    LyapunovSnapshot { z, y, w, h, psi }
}

/// Prox-gradient optimality residual `||x - prox_{eta psi}(x - eta grad f(x))|| / eta`
/// with `eta = 1/L`; equals `||grad f(x)||` when `psi = 0`.
pub fn optimality_residual<T: Scalar>(obj: &Objective<T>, x: &DenseVector<T>) -> T {
    let eta = T::one() / obj.smoothness();
    let grad = obj.grad_full(x);
    let stepped = DenseVector::axpy(-eta, &grad, x);
    let proxed = obj.prox(eta, &stepped);
    x.sub(&proxed).norm() / eta
}

/// Reference optimum: the best of three uncompressed solvers.
#[derive(Clone, Debug)]
pub struct ReferenceSolution<T> {
    pub x_star: DenseVector<T>,
    pub f_star: T,
    /// Which uncompressed solver won.
    pub solver: &'static str,
    pub iterations: u64,
    pub residual: T,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct ReferenceOptions {
    pub max_iters: u64,
    /// Early-exit tolerance, relative to `max(1, residual(x0))`.
    pub tol_rel: f64,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self {
            max_iters: 100_000,
            tol_rel: 1e-12,
        }
    }
}

const REFERENCE_CHECK_EVERY: u64 = 25;

/// Runs uncompressed adiana, diana and dcgd to the cap (or tolerance) and
/// returns the argmin of the three final objective values.
pub fn solve_reference<T: Scalar>(
    obj: &Objective<T>,
    opts: &ReferenceOptions,
) -> Result<ReferenceSolution<T>, HarnessError> {
    if obj.strong_convexity() <= T::zero() {
        return Err(HarnessError::Config(
            "reference solve requires a strongly convex objective (mu > 0)".into(),
        ));
    }
    let n = obj.node_count();
    let l = obj.smoothness();
    let mu = obj.strong_convexity();
    let comp = Compressor::identity(obj.dim());
    let x0 = DenseVector::zeros(obj.dim());
    let tol = T::from_config(opts.tol_rel) * optimality_residual(obj, &x0).max(T::one());

    let candidates: [(&'static str, Schedule<T>); 3] = [
        (
            "adiana",
            Schedule::Adiana(AdianaSchedule::new(l, mu, T::zero(), n)?),
        ),
        ("diana", Schedule::Diana(DianaParams::new(l, T::zero(), n)?)),
        ("dcgd", Schedule::Dcgd { eta: T::one() / l }),
    ];

    let mut best: Option<ReferenceSolution<T>> = None;
    for (name, schedule) in candidates {
        let mut driver = Driver::new(obj, &comp, schedule, x0.clone(), 0, false)?;
        let mut residual = optimality_residual(obj, driver.solution());
        let mut converged = residual <= tol;
        while driver.iteration() < opts.max_iters && !converged {
            driver.step();
            if driver.iteration() % REFERENCE_CHECK_EVERY == 0 {
                residual = optimality_residual(obj, driver.solution());
                converged = residual <= tol;
            }
        }
        residual = optimality_residual(obj, driver.solution());
        converged = residual <= tol;
        let value = obj.value(driver.solution());
        let replace = match &best {
            None => true,
            Some(b) => value < b.f_star,
        };
        if replace {
            best = Some(ReferenceSolution {
                x_star: driver.solution().clone(),
                f_star: value,
                solver: name,
                iterations: driver.iteration(),
                residual,
                converged,
            });
        }
    }
    Ok(best.expect("three candidate solvers"))
}

enum DriverState<T> {
    Cgd(CgdState<T>),
    Acgd(AcgdState<T>),
    Dcgd(DcgdState<T>),
    Diana(DianaState<T>),
    Adiana(AdianaState<T>),
}

/// Steps one configured method over one objective.
pub struct Driver<'a, T: Scalar> {
    obj: &'a Objective<T>,
    comp: &'a Compressor,
    schedule: Schedule<T>,
    streams: StreamFactory,
    count_shift_messages: bool,
    state: DriverState<T>,
}

impl<'a, T: Scalar> Driver<'a, T> {
    pub fn new(
        obj: &'a Objective<T>,
        comp: &'a Compressor,
        schedule: Schedule<T>,
        x0: DenseVector<T>,
        seed: u64,
        count_shift_messages: bool,
    ) -> Result<Self, HarnessError> {
        if x0.dim() != obj.dim() || comp.dim() != obj.dim() {
            return Err(HarnessError::Config(format!(
                "dimension mismatch: x0 {}, objective {}, compressor {}",
                x0.dim(),
                obj.dim(),
                comp.dim()
            )));
        }
        let n = obj.node_count();
        let state = match &schedule {
            Schedule::Cgd { .. } => {
                Self::require_single_machine(obj, "cgd")?;
                DriverState::Cgd(CgdState::new(x0))
            }
            Schedule::Acgd(s) => {
                Self::require_single_machine(obj, "acgd")?;
                // schedule infeasibility is a configuration error before the
                // first step
                s.validate(1_000)?;
                DriverState::Acgd(AcgdState::new(x0))
            }
            Schedule::Dcgd { .. } => DriverState::Dcgd(DcgdState::new(x0)),
            Schedule::Diana(_) => DriverState::Diana(DianaState::new(x0, n)),
            Schedule::Adiana(_) => DriverState::Adiana(AdianaState::new(x0, n)),
        };
        Ok(Self {
            obj,
            comp,
            schedule,
            streams: StreamFactory::new(seed),
            count_shift_messages,
            state,
        })
    }

    fn require_single_machine(obj: &Objective<T>, method: &str) -> Result<(), HarnessError> {
        if obj.node_count() != 1 {
            return Err(HarnessError::Config(format!(
                "{method} is a single-machine method (n = 1), got n = {}",
                obj.node_count()
            )));
        }
        if !obj.regularizer().is_zero() {
            return Err(HarnessError::Config(format!(
                "{method} does not support a nonsmooth regularizer"
            )));
        }
        Ok(())
    }

    /// Advances one iteration and returns the raw bits sent this round
    /// (summed over every node message).
    pub fn step(&mut self) -> f64 {
        match (&mut self.state, &self.schedule) {
            (DriverState::Cgd(s), Schedule::Cgd { eta }) => {
                let out = cgd_step(s, self.obj, self.comp, *eta, &self.streams);
                *s = out.state;
                out.bits_sent
            }
            (DriverState::Acgd(s), Schedule::Acgd(sched)) => {
                let out = acgd_step(s, self.obj, self.comp, sched, &self.streams);
                *s = out.state;
                out.bits_sent
            }
            (DriverState::Dcgd(s), Schedule::Dcgd { eta }) => {
                let out = dcgd_step(s, self.obj, self.comp, *eta, &self.streams);
                *s = out.state;
                out.bits_sent
            }
            (DriverState::Diana(s), Schedule::Diana(params)) => {
                let out = diana_step(s, self.obj, self.comp, params, &self.streams);
                *s = out.state;
                out.bits_sent
            }
            (DriverState::Adiana(s), Schedule::Adiana(sched)) => {
                let out = adiana_step(
                    s,
                    self.obj,
                    self.comp,
                    sched,
                    &self.streams,
                    self.count_shift_messages,
                );
                *s = out.state;
                out.bits_sent
            }
            _ => unreachable!("state constructed from schedule"),
        }
    }

    /// The iterate whose objective value the trace reports.
    pub fn solution(&self) -> &DenseVector<T> {
        match &self.state {
            DriverState::Cgd(s) => &s.x,
            DriverState::Acgd(s) => &s.y,
            DriverState::Dcgd(s) => &s.x,
            DriverState::Diana(s) => &s.x,
            DriverState::Adiana(s) => &s.y,
        }
    }

    pub fn iteration(&self) -> u64 {
        match &self.state {
            DriverState::Cgd(s) => s.k,
            DriverState::Acgd(s) => s.k,
            DriverState::Dcgd(s) => s.k,
            DriverState::Diana(s) => s.k,
            DriverState::Adiana(s) => s.k,
        }
    }

    /// Raw bits sent per round (summed over node messages).
    pub fn bits_per_round(&self) -> f64 {
        let n = self.obj.node_count() as f64;
        match &self.schedule {
            Schedule::Cgd { .. } | Schedule::Acgd(_) => self.comp.bit_cost(),
            Schedule::Dcgd { .. } | Schedule::Diana(_) => self.comp.bit_cost() * n,
            Schedule::Adiana(_) => {
                let per_node = if self.count_shift_messages { 2.0 } else { 1.0 };
                self.comp.bit_cost() * per_node * n
            }
        }
    }

    pub fn adiana_view(&self) -> Option<(&AdianaState<T>, &AdianaSchedule<T>)> {
        match (&self.state, &self.schedule) {
            (DriverState::Adiana(s), Schedule::Adiana(sched)) => Some((s, sched)),
            _ => None,
        }
    }
}

/// Result of one run: the (possibly thinned) trace plus summary numbers.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub trace: Vec<TraceRecord>,
    pub iterations: u64,
    pub total_bits: f64,
    pub final_f_gap: f64,
    /// Rows whose f-gap was clamped at the negative precision floor.
    pub clamped_rows: u64,
}

const F_GAP_FLOOR: f64 = -1e-10;
const TRACE_TARGET_ROWS: u64 = 10_000;

/// Runs `schedule` on `obj` against a precomputed reference solution.
pub fn run_on_objective<T: Scalar>(
    obj: &Objective<T>,
    comp: &Compressor,
    schedule: Schedule<T>,
    x0: DenseVector<T>,
    seed: u64,
    reference: &ReferenceSolution<T>,
    settings: &RunSettings,
) -> Result<RunResult, HarnessError> {
    settings.budget.validate()?;
    let mut driver = Driver::new(obj, comp, schedule, x0, seed, settings.count_shift_messages)?;
    if settings.diagnostics && driver.adiana_view().is_none() {
        return Err(HarnessError::Config(
            "lyapunov diagnostics are defined for adiana only".into(),
        ));
    }

    let raw_per_round = driver.bits_per_round();
    let accounted_per_round = if settings.multiply_bits_by_nodes {
        raw_per_round
    } else {
        raw_per_round / obj.node_count() as f64
    };

    let mut planned = settings.budget.max_iters.unwrap_or(u64::MAX);
    if let Some(max_bits) = settings.budget.max_bits {
        let by_bits = (max_bits / accounted_per_round).ceil() as u64;
        planned = planned.min(by_bits.max(1));
    }
    let stride = settings
        .trace_every
        .filter(|s| *s > 0)
        .unwrap_or_else(|| planned.div_ceil(TRACE_TARGET_ROWS).max(1));

    let mut trace = Vec::new();
    let mut clamped = 0u64;
    let mut record = |driver: &Driver<T>, k: u64, clamped: &mut u64| {
        let iterate = driver.solution();
        let mut f_gap = (obj.value(iterate) - reference.f_star).to_f64_lossy();
        if f_gap < F_GAP_FLOOR {
            *clamped += 1;
            f_gap = F_GAP_FLOOR;
        }
        let lyapunov = if settings.diagnostics {
            driver.adiana_view().map(|(state, sched)| {
                lyapunov_snapshot(state, obj, &reference.x_star, reference.f_star, sched).values()
            })
        } else {
            None
        };
        trace.push(TraceRecord {
            iter: k,
            bits: k as f64 * accounted_per_round,
            f_gap,
            grad_norm: optimality_residual(obj, iterate).to_f64_lossy(),
            dist_opt: iterate.dist(&reference.x_star).to_f64_lossy(),
            lyapunov,
        });
    };

    record(&driver, 0, &mut clamped);
    for k in 1..=planned {
        driver.step();
        if k % stride == 0 || k == planned {
            record(&driver, k, &mut clamped);
        }
    }

    let final_f_gap = trace.last().expect("at least the initial row").f_gap;
    Ok(RunResult {
        trace,
        iterations: planned,
        total_bits: planned as f64 * accounted_per_round,
        final_f_gap,
        clamped_rows: clamped,
    })
}

/// Constants a run resolves before iterating; printed by `validate`.
#[derive(Clone, Debug, Serialize)]
pub struct ResolvedConstants {
    pub dim: usize,
    pub samples: usize,
    pub l: f64,
    pub mu: f64,
    pub omega: f64,
    pub bits_per_message: f64,
    pub frobenius_fallback: bool,
}

/// A spec resolved against its dataset: objective, compressor and schedule.
pub struct ResolvedExperiment<T> {
    pub objective: Objective<T>,
    pub compressor: Compressor,
    pub schedule: Schedule<T>,
    pub constants: ResolvedConstants,
    pub settings: RunSettings,
    pub seed: u64,
}

/// Loads the dataset and builds everything the spec describes, without
/// running the iteration loop.
pub fn resolve<T: Scalar>(spec: &ExperimentSpec) -> Result<ResolvedExperiment<T>, HarnessError> {
    spec.budget().validate()?;
    if spec.lambda < 0.0 {
        return Err(HarnessError::Config("lambda must be nonnegative".into()));
    }
    if spec.method.is_single_machine() {
        if spec.nodes != 1 {
            return Err(HarnessError::Config(format!(
                "{} is a single-machine method; use nodes = 1",
                spec.method
            )));
        }
        if spec.l1.is_some() {
            return Err(HarnessError::Config(format!(
                "{} does not support an l1 regularizer",
                spec.method
            )));
        }
    }
    if spec.diagnostics && spec.method != Method::Adiana {
        return Err(HarnessError::Config(
            "lyapunov diagnostics are defined for adiana only".into(),
        ));
    }

    let file = File::open(&spec.dataset).map_err(|e| {
        HarnessError::Config(format!(
            "cannot open dataset {}: {e}",
            spec.dataset.display()
        ))
    })?;
    let ds: SparseDataset<T> = parse_libsvm(BufReader::new(file), None)?;
    let scheme = match spec.partition {
        PartitionKind::Contiguous => PartitionScheme::Contiguous,
        PartitionKind::Shuffled => PartitionScheme::Shuffled { seed: spec.seed },
    };
    let partition = ds.partition(spec.nodes, scheme)?;
    let regularizer = match spec.l1 {
        Some(w) if w > 0.0 => Regularizer::L1(T::from_config(w)),
        Some(_) => Regularizer::Zero,
        None => Regularizer::Zero,
    };
    let objective = logistic_objective(&ds, &partition, T::from_config(spec.lambda), regularizer)?;

    let natural_omega = spec
        .overrides
        .natural_omega
        .unwrap_or(NATURAL_OMEGA_DEFAULT);
    let compressor = spec
        .compressor
        .build_with_natural_omega(objective.dim(), natural_omega)?;

    let omega = compressor.omega();
    let mut schedule = build_schedule(
        spec.method,
        objective.smoothness(),
        objective.strong_convexity(),
        T::from_config(omega),
        spec.nodes,
    )?;
    apply_overrides(&mut schedule, &spec.overrides, &objective, spec.nodes)?;

    let constants = ResolvedConstants {
        dim: objective.dim(),
        samples: ds.len(),
        l: objective.smoothness().to_f64_lossy(),
        mu: objective.strong_convexity().to_f64_lossy(),
        omega,
        bits_per_message: compressor.bit_cost(),
        frobenius_fallback: objective.constants_meta().frobenius_fallback,
    };
    let settings = RunSettings {
        budget: spec.budget(),
        diagnostics: spec.diagnostics,
        trace_every: spec.overrides.trace_every,
        multiply_bits_by_nodes: spec.overrides.multiply_bits_by_nodes.unwrap_or(false),
        count_shift_messages: spec.overrides.count_shift_message.unwrap_or(true),
    };
    Ok(ResolvedExperiment {
        objective,
        compressor,
        schedule,
        constants,
        settings,
        seed: spec.seed,
    })
}

fn apply_overrides<T: Scalar>(
    schedule: &mut Schedule<T>,
    overrides: &Overrides,
    obj: &Objective<T>,
    n: usize,
) -> Result<(), HarnessError> {
    let eta = overrides.eta.map(T::from_config);
    let alpha = overrides.alpha.map(T::from_config);
    match schedule {
        Schedule::Cgd { eta: e } | Schedule::Dcgd { eta: e } => {
            if let Some(v) = eta {
                *e = v;
            }
        }
        Schedule::Acgd(s) => {
            if let Some(v) = eta {
                s.eta = v;
            }
        }
        Schedule::Diana(p) => {
            if let Some(v) = eta {
                p.eta = v;
            }
            if let Some(v) = alpha {
                p.alpha = v;
            }
        }
        Schedule::Adiana(s) => {
            if let Some(v) = eta {
                // dependent parameters are recomputed from the custom step size
                *s = AdianaSchedule::with_eta(
                    obj.smoothness(),
                    obj.strong_convexity(),
                    s.omega,
                    n,
                    v,
                )?;
            }
            if let Some(v) = alpha {
                s.alpha = v;
            }
        }
    }
    Ok(())
}

/// Full output of one experiment.
pub struct ExperimentOutput<T> {
    pub constants: ResolvedConstants,
    pub schedule: Schedule<T>,
    pub reference: ReferenceSolution<T>,
    pub result: RunResult,
}

/// Resolves the spec, solves the reference optimum (unless one is supplied)
/// and runs the method to its budget.
pub fn run_experiment_with_reference<T: Scalar>(
    spec: &ExperimentSpec,
    reference: Option<ReferenceSolution<T>>,
) -> Result<ExperimentOutput<T>, HarnessError> {
    let resolved = resolve::<T>(spec)?;
    let reference = match reference {
        Some(r) => r,
        None => solve_reference(&resolved.objective, &ReferenceOptions::default())?,
    };
    let result = run_on_objective(
        &resolved.objective,
        &resolved.compressor,
        resolved.schedule,
        DenseVector::zeros(resolved.objective.dim()),
        resolved.seed,
        &reference,
        &resolved.settings,
    )?;
    Ok(ExperimentOutput {
        constants: resolved.constants,
        schedule: resolved.schedule,
        reference,
        result,
    })
}

pub fn run_experiment<T: Scalar>(
    spec: &ExperimentSpec,
) -> Result<ExperimentOutput<T>, HarnessError> {
    run_experiment_with_reference(spec, None)
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders a trace as CSV with 17-significant-digit floats.
///
/// Header: `iter,bits,f_gap,grad_norm,dist_opt[,Z,Y,W,H,Psi]`.
pub fn trace_to_csv(trace: &[TraceRecord], diagnostics: bool) -> String {
    let mut out = String::new();
    out.push_str("iter,bits,f_gap,grad_norm,dist_opt");
    if diagnostics {
        out.push_str(",Z,Y,W,H,Psi");
    }
    out.push('\n');
    for row in trace {
        out.push_str(&format!(
            "{},{},{},{},{}",
            row.iter,
            fmt_float(row.bits),
            fmt_float(row.f_gap),
            fmt_float(row.grad_norm),
            fmt_float(row.dist_opt)
        ));
        if diagnostics {
            let l = row.lyapunov.unwrap_or(LyapunovValues {
                z: f64::NAN,
                y: f64::NAN,
                w: f64::NAN,
                h: f64::NAN,
                psi: f64::NAN,
            });
            out.push_str(&format!(
                ",{},{},{},{},{}",
                fmt_float(l.z),
                fmt_float(l.y),
                fmt_float(l.w),
                fmt_float(l.h),
                fmt_float(l.psi)
            ));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{QuadraticLoss, SmoothLoss};

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
    fn reference_closed_form_quadratic() {
        // f = x' diag(1,4) x / 2 - [1,0]'x: x* = [1, 0], f* = -1/2
        let obj = quadratic(vec![1.0, 4.0], vec![1.0, 0.0]);
        let r = solve_reference(&obj, &ReferenceOptions::default()).unwrap();
        assert!(r.converged, "residual {}", r.residual);
        assert!(r.x_star.dist(&DenseVector::from_vec(vec![1.0, 0.0])) < 1e-9);
        assert!((r.f_star + 0.5).abs() < 1e-12);
    }

    #[test]
    fn budget_validation() {
        assert!(Budget::default().validate().is_err());
        assert!(Budget {
            max_iters: Some(0),
            max_bits: None
        }
        .validate()
        .is_err());
        assert!(Budget {
            max_iters: None,
            max_bits: Some(1e6)
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn bit_meter_is_exact_product() {
        let obj = quadratic(vec![1.0, 2.0], vec![0.3, 0.4]);
        let reference = solve_reference(&obj, &ReferenceOptions::default()).unwrap();
        let comp = Compressor::random_k(2, 1).unwrap();
        let schedule = build_schedule(Method::Cgd, 2.0, 0.5, comp.omega(), 1).unwrap();
        let settings = RunSettings {
            budget: Budget {
                max_iters: Some(100),
                max_bits: None,
            },
            ..RunSettings::default()
        };
        let result = run_on_objective(
            &obj,
            &comp,
            schedule,
            DenseVector::zeros(2),
            1,
            &reference,
            &settings,
        )
        .unwrap();
        for row in &result.trace {
            let expected = row.iter as f64 * 32.0;
            assert!((row.bits - expected).abs() <= 1e-9 * expected.max(1.0));
        }
        assert_eq!(result.iterations, 100);
    }

    #[test]
    fn bits_budget_stops_the_run() {
        let obj = quadratic(vec![1.0, 2.0], vec![0.3, 0.4]);
        let reference = solve_reference(&obj, &ReferenceOptions::default()).unwrap();
        let comp = Compressor::identity(2); // 64 bits/message
        let schedule = build_schedule(Method::Dcgd, 2.0, 0.5, 0.0, 1).unwrap();
        let settings = RunSettings {
            budget: Budget {
                max_iters: Some(10_000),
                max_bits: Some(640.0),
            },
            ..RunSettings::default()
        };
        let result = run_on_objective(
            &obj,
            &comp,
            schedule,
            DenseVector::zeros(2),
            1,
            &reference,
            &settings,
        )
        .unwrap();
        assert_eq!(result.iterations, 10);
        assert_eq!(result.total_bits, 640.0);
    }

    #[test]
    fn acgd_identity_on_quadratic_decays_geometrically() {
        // omega = 0 acgd-scvx behaves like deterministic AGD: the f-gap
        // contracts at least at the theoretical potential rate overall.
        let obj = quadratic(vec![0.01, 1.0], vec![0.0, 0.0]);
        let reference = solve_reference(&obj, &ReferenceOptions::default()).unwrap();
        let comp = Compressor::identity(2);
        let schedule = build_schedule(Method::AcgdStronglyConvex, 1.0, 0.01, 0.0, 1).unwrap();
        let settings = RunSettings {
            budget: Budget {
                max_iters: Some(300),
                max_bits: None,
            },
            ..RunSettings::default()
        };
        let x0 = DenseVector::from_vec(vec![1.0, 1.0]);
        let result =
            run_on_objective(&obj, &comp, schedule, x0.clone(), 3, &reference, &settings).unwrap();
        let rate: f64 = 1.0 - 0.1; // 1 - sqrt(mu/L)/(1+omega)
        let phi0 =
            (2.0 / 0.01) * (obj.value(&x0) - reference.f_star) + x0.dist_sq(&reference.x_star);
        let k = 300u64;
        let bound = rate.powi(k as i32) * phi0;
        let final_gap = result.final_f_gap;
        assert!(
            (2.0 / 0.01) * final_gap <= 1.1 * bound,
            "gap {final_gap} vs bound {bound}"
        );
    }

    #[test]
    fn lyapunov_zero_at_the_optimum() {
        let obj = quadratic(vec![1.0, 4.0], vec![1.0, 0.0]);
        let reference = solve_reference(&obj, &ReferenceOptions::default()).unwrap();
        let sched = AdianaSchedule::new(4.0, 1.0, 0.0, 1).unwrap();
        let mut state = AdianaState::new(reference.x_star.clone(), 1);
        state.shifts[0] = obj.grad_node(0, &reference.x_star);
        state.shift_mean = state.shifts[0].clone();
        let snap = lyapunov_snapshot(&state, &obj, &reference.x_star, reference.f_star, &sched);
        assert!(snap.z.abs() < 1e-20);
        assert!(snap.y.abs() < 1e-12);
        assert!(snap.w.abs() < 1e-12);
        assert!(snap.h.abs() < 1e-20);
        assert!(snap.psi.abs() < 1e-10);
    }

    #[test]
    fn csv_format_shape() {
        let rows = vec![TraceRecord {
            iter: 0,
            bits: 0.0,
            f_gap: 0.125,
            grad_norm: 1.0,
            dist_opt: 2.0,
            lyapunov: None,
        }];
        let csv = trace_to_csv(&rows, false);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "iter,bits,f_gap,grad_norm,dist_opt");
        let row = lines.next().unwrap();
        assert!(row.starts_with("0,0.0000000000000000e0,1.2500000000000000e-1,"));
    }
}
