//! Robust signal subspace estimation under sparse column-wise interference.
//!
//! A snapshot matrix `X` (channels x snapshots, complex) is modeled as a
//! low-rank signal part plus dense noise plus interference that hits a sparse
//! subset of snapshots. The estimator alternates two closed-form steps:
//!
//! * a basis step that fits the `d` leading left singular vectors of
//!   `X - Delta`, and
//! * an interference step that shrinks the column norms of the out-of-subspace
//!   residual through the proximal operator of the sorted-L1 (SLOPE) norm.
//!
//! Columns whose shrunken norm is exactly zero are declared clean; the rest
//! form the detected support. With the penalty sequence from [`lambda`], the
//! detector controls the false discovery rate among clean snapshots.
//!
//! Module map:
//!
//! * [`slope`]: sorted-L1 norm, its column-group variant, and the exact prox.
//! * [`solver`]: snapshot/basis types, the two half-steps, and the alternation.
//! * [`lambda`]: chi-quantile based penalty design plus a Monte Carlo check.
//! * [`sim`]: array-response scenario generator with labeled interference.
//! * [`metrics`]: confusion counts, subspace refit, grid DOA, report records.

pub mod error;
pub mod lambda;
pub mod metrics;
pub mod sim;
pub mod slope;
pub mod solver;

mod special;
mod util;

pub use error::{Error, Result};
pub use lambda::{LambdaSpec, NoiseConvention};
pub use metrics::{Confusion, DetectionReport};
pub use sim::{ArrayGeometry, InterferenceRegime, LabeledDataset, ScenarioConfig};
pub use slope::PenaltyVector;
pub use solver::{
    Initialization, InterferenceEstimate, SnapshotMatrix, SolverConfig, SolverResult,
    SubspaceEstimate,
};

pub use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;
