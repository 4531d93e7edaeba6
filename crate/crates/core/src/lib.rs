//! Sparse group principal component analysis.
//!
//! Estimates principal components whose loadings are sparse both across
//! predefined groups of features and across features within the active
//! groups. The estimator is a power iteration in which every product with the
//! sample covariance is followed by group-wise block soft thresholding and
//! entry-wise soft thresholding. The covariance is never formed: products go
//! through the `n x p` data matrix in `O(np)`.
//!
//! * [`operator`]: the implicit covariance operator and its deflation.
//! * [`solver`]: the thresholded power iteration, sequential deflation and
//!   the orthogonal-iteration subspace variant.
//! * [`init`]: two-stage diagonal thresholding for the starting vector.
//! * [`tuning`]: subsampling-based stability selection of thresholds.
//! * [`theory`]: threshold levels, oracle sets and rate bounds.
//! * [`simgen`]: spiked covariance simulations and recovery metrics.

pub mod eigen;
pub mod error;
pub mod init;
pub mod operator;
pub mod rng;
pub mod simgen;
pub mod solver;
pub mod theory;
pub mod threshold;
pub mod tuning;
pub mod types;

pub use error::{Result, SgpcaError};
pub use init::{
    diagonal_threshold_init, diagonal_threshold_init_op, InitConfig, InitFallback, InitOutcome,
};
pub use operator::{cov_apply, Centering, CovOperator, DeflationMode};
pub use solver::{fit, fit_component, fit_subspace, fit_with_diagonal_init, SolverConfig};
pub use threshold::{block_soft_threshold, soft_threshold, subspace_distance};
pub use tuning::{
    tune_and_fit, tune_component, AlignmentReport, AlignmentRow, TuningGrid, TuningOptions,
};
pub use types::{DataMatrix, GroupPartition, PCEstimate, ThresholdSchedule};
