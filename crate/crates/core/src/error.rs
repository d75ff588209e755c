use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside the domain of its spectral family or prior.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A cached spectral value reached 1, so the windowed density does not exist.
    #[error("existence violation: phi{0} = {1} is not in [0,1)")]
    ExistenceViolation(String, f64),

    /// A point fell outside the window rectangle (or the unit cube).
    #[error("point outside the window")]
    PointOutsideWindow,

    /// Every cached spectral value is zero, so conditioning on at least one
    /// point is impossible.
    #[error("degenerate prior: all spectral values are zero")]
    DegeneratePrior,

    /// Bad run configuration (hyperparameters, schedule, window policy).
    #[error("configuration error: {0}")]
    Config(String),

    /// The design matrix is unusable (e.g. X^T X singular for the g-prior).
    #[error("data error: {0}")]
    Data(String),

    /// Arithmetic broke down mid-run (non-finite state).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
