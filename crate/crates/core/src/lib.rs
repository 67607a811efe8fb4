//! Communication-efficient optimization toolkit.
//!
//! Implements compressed gradient descent and its accelerated and
//! variance-reduced variants (cgd, acgd, dcgd, diana, adiana) with pluggable
//! unbiased compression operators, a deterministic simulated multi-node
//! harness with exact communicated-bit accounting, and trace diagnostics
//! that expose the methods' convergence behavior.
//!
//! Core math is generic over the scalar type via [`Scalar`] (`f32`/`f64`);
//! the aliases below pin `f64`, which is what the CLI and harness use.
//!
//! ```
//! use compgrad::{
//!     build_schedule, solve_reference, run_on_objective, Budget, Compressor, Method,
//!     Objective, QuadraticLoss, ReferenceOptions, Regularizer, RunSettings, SmoothLoss,
//!     Vector64,
//! };
//!
//! let loss = QuadraticLoss::diagonal(
//!     Vector64::from_vec(vec![1.0, 4.0]),
//!     Vector64::from_vec(vec![1.0, 0.0]),
//! );
//! let obj = Objective::new(vec![SmoothLoss::Quadratic(loss)], Regularizer::Zero).unwrap();
//! let comp = Compressor::random_k(2, 1).unwrap();
//! let schedule = build_schedule(
//!     Method::AcgdStronglyConvex,
//!     obj.smoothness(),
//!     obj.strong_convexity(),
//!     comp.omega(),
//!     1,
//! )
//! .unwrap();
//! let reference = solve_reference(&obj, &ReferenceOptions::default()).unwrap();
//! let settings = RunSettings {
//!     budget: Budget { max_iters: Some(200), max_bits: None },
//!     ..RunSettings::default()
//! };
//! let result = run_on_objective(
//!     &obj, &comp, schedule, Vector64::zeros(2), 7, &reference, &settings,
//! )
//! .unwrap();
//! assert!(result.final_f_gap < 1e-3);
//! ```

pub mod algorithms;
pub mod compressors;
pub mod dataset;
pub mod harness;
pub mod objective;
pub mod rng;
pub mod scalar;
pub mod vector;

pub use algorithms::{
    acgd_step, adiana_step, build_schedule, cgd_step, cgd_step_size, dcgd_step, dcgd_step_size,
    diana_step, AcgdMode, AcgdSchedule, AcgdState, AdianaSchedule, AdianaState, CgdState,
    DcgdState, DianaParams, DianaState, Method, Schedule, ScheduleError, StepOutcome,
};
pub use compressors::{
    CompressedMessage, Compressor, CompressorError, CompressorKind, CompressorSpec,
    NATURAL_OMEGA_DEFAULT,
};
pub use dataset::{
    parse_libsvm, write_libsvm, DatasetError, Partition, PartitionScheme, SparseDataset, SparseRow,
};
pub use harness::{
    lyapunov_snapshot, optimality_residual, resolve, run_experiment, run_experiment_with_reference,
    run_on_objective, solve_reference, trace_to_csv, Budget, Driver, ExperimentOutput,
    ExperimentSpec, HarnessError, LyapunovSnapshot, LyapunovValues, Overrides, PartitionKind,
    ReferenceOptions, ReferenceSolution, ResolvedConstants, ResolvedExperiment, RunResult,
    RunSettings, TraceRecord,
};
pub use objective::{
    logistic_objective, LogisticLoss, Objective, ObjectiveError, QuadraticLoss, Regularizer,
    SmoothLoss,
};
pub use rng::{
    RngStream, StreamFactory, StreamKey, CHANNEL_GRADIENT, CHANNEL_PARTITION, CHANNEL_SERVER,
    CHANNEL_SHIFT,
};
pub use scalar::Scalar;
pub use vector::DenseVector;

/// `f64` vector, the element type the harness and CLI run on.
pub type Vector64 = DenseVector<f64>;
/// `f32` vector for reduced-precision experimentation.
pub type Vector32 = DenseVector<f32>;
/// `f64` objective.
pub type Objective64 = Objective<f64>;
/// `f64` method schedule.
pub type Schedule64 = Schedule<f64>;
/// `f64` reference solution.
pub type ReferenceSolution64 = ReferenceSolution<f64>;
