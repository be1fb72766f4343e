//! Adaptive (AdaGrad-style) preconditioning combined with loopless
//! variance-reduced gradient estimators for finite-sum convex problems.
//!
//! - [`problems`]: objectives, datasets and preprocessing.
//! - [`scaling`]: AdaGrad-Norm/Diagonal, RMSprop, Adam and the feasible box.
//! - [`estimators`]: SGD, full batch, SAGA and L-SVRG estimates.
//! - [`optimizer`]: the driver, reference solutions and rate fits.
//! - [`verify`]: numeric checks of the bounds the method relies on.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod linalg;
pub mod optimizer;
pub mod problems;
pub mod rng;
pub mod scaling;
pub mod verify;

pub use error::{Error, Result};
pub use estimators::{Estimator, EstimatorKind, EstimatorOptions};
pub use optimizer::{run, OptimizerConfig, RunTrace, Solver};
pub use problems::{Dataset, FiniteSumProblem, ProblemKind};
pub use scaling::{Domain, Metric, ScalingKind, ScalingState};
