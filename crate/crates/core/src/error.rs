use thiserror::Error;

use crate::qstate::DensityMatrix;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("phase is undefined: coherence magnitude {magnitude:e} is too small")]
    DegeneratePhase { magnitude: f64 },

    #[error("fringe fit is degenerate: {0}")]
    FitDegenerate(String),

    #[error("visibility is undefined when both extrema are zero")]
    UndefinedVisibility,

    #[error("correlator is undefined: the four rates sum to zero")]
    UndefinedCorrelator,

    #[error("configuration error: {0}")]
    Configuration(String),

    /// The optimizer ran out of iterations. `best` is the lowest-cost
    /// physical iterate seen.
    #[error("no convergence after {iterations} iterations (gradient norm {gradient_norm:e})")]
    Convergence {
        iterations: usize,
        gradient_norm: f64,
        best: Box<DensityMatrix>,
    },

    #[error("{failed} of {total} bootstrap resamples failed")]
    BootstrapFailed { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
