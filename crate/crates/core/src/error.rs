use thiserror::Error;

use crate::lie::GroupKind;

/// Errors raised by the kernels, residual assemblers and the solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("group tag mismatch: expected {expected:?}, found {found:?}")]
    TagMismatch { expected: GroupKind, found: GroupKind },

    #[error("matrix is not in the image of hat for {group:?} (defect {defect:.3e})")]
    NotInAlgebra { group: GroupKind, defect: f64 },

    #[error(
        "retraction inverse is singular (condition number {condition:.3e}); \
         the relative rotation is too close to pi, reduce the step size h"
    )]
    RetractionSingular { condition: f64 },

    #[error("retraction inverse is singular at step {index}: {source}")]
    RetractionSingularAt {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid retraction configuration: {0}")]
    Config(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("ill-posed adapted basis: rank {rank} < {expected} at sampled configuration")]
    IllPosedBasis { rank: usize, expected: usize },

    #[error("singular linear system at Newton iteration {iteration} (condition estimate {condition:.3e})")]
    SingularSystem { iteration: usize, condition: f64 },

    #[error("no convergence at h = {h} (residual {residual:.3e} after {iterations} iterations)")]
    NoConvergence { h: f64, residual: f64, iterations: usize },

    #[error("non-finite value at index {index} ({context})")]
    Domain { index: usize, context: &'static str },
}

pub type Result<T> = std::result::Result<T, Error>;
