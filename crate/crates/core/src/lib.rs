//! Robust regression by projected sub-gradient descent.
//!
//! Sparse vectors are fitted by iterative hard thresholding and low-rank
//! matrices by Riemannian sub-gradient descent, both driven by a two-phase
//! stepsize schedule: geometric decay first, then a constant step sized to
//! the noise level.

pub mod datagen;
pub mod error;
pub mod harness;
pub mod init;
pub mod instance;
pub mod linalg;
pub mod loss;
pub mod lowrank;
pub mod problem;
pub mod schedule;
pub mod sparse;

pub use error::{Error, Result};
pub use linalg::{hard_threshold, qr_thin, retract_dense, retract_fast, svd_top, tangent_project, LowRankFactors, Matrix, Vector};
pub use loss::{full_subgradient_mat, full_subgradient_vec, loss_subgrad, loss_value, objective, LossSpec};
pub use lowrank::{rsgrad_solve, RsGradConfig};
pub use problem::{MatrixProblem, TruthError, VectorProblem};
pub use schedule::{InitialStep, Mode, NoiseScaleEstimator, PhaseTwoStep, Schedule, SolveOutput, SwitchRule, TraceRecord};
pub use sparse::{iht_solve, IhtConfig};
