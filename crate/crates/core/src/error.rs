use thiserror::Error;

/// Errors raised by the estimators, selectors and metrics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Both weighted sine and cosine sums vanish, so no mean direction exists.
    #[error("degenerate direction: weighted sine and cosine sums are both zero")]
    DegenerateDirection,

    #[error("degenerate weights: all mean-shift weights vanish")]
    DegenerateWeights,

    /// The predictor marginal is too small for the conditional ratio to be trusted.
    #[error("low support at predictor {predictor}: marginal density {marginal:e} below threshold")]
    LowSupport { predictor: f64, marginal: f64 },

    #[error("mean shift failed at iterate {iteration}: {source}")]
    Iterate {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("undefined distance: empty mode set{}", .mesh_index.map(|i| format!(" at mesh index {i}")).unwrap_or_default())]
    UndefinedDistance { mesh_index: Option<usize> },

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("geometry mismatch: expected {expected}, found {found}")]
    GeometryMismatch { expected: String, found: String },

    #[error("pilot fit failed: {0}")]
    PilotFit(String),

    #[error("not supported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
