use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("could not place AP {ap} with the minimum spacing after {attempts} attempts")]
    PlacementFailed { ap: usize, attempts: usize },

    #[error("shadowing covariance is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    CovarianceNotPsd { min_eigenvalue: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate linearization anchor: {0}")]
    DegenerateAnchor(String),

    #[error("convex subproblem is infeasible")]
    Infeasible,

    #[error("numerical failure in the convex solver: {0}")]
    NumericalFailure(String),

    #[error("sample set is empty")]
    EmptySamples,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
