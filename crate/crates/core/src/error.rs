use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Invalid configuration (orders, grids, missing parameters, ...).
    #[error("configuration error: {0}")]
    Config(String),
    /// An integral that is infinite for the requested arguments.
    #[error("divergent integral: {0}")]
    Divergent(String),
    /// Data does not match the score model (e.g. real scores with a count model).
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    /// A discrete distribution with no mass.
    #[error("degenerate distribution: {0}")]
    Degenerate(String),
    /// A predictive grid whose truncated tail is above tolerance.
    #[error("grid truncation: tail mass {tail:.3e} exceeds tolerance {tol:.3e} at M = {grid_max}")]
    GridTruncation { tail: f64, tol: f64, grid_max: usize },
    /// Invalid dataset contents.
    #[error("invalid data: {0}")]
    Data(String),
    #[error("fit failed: {0}")]
    FitFailure(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for errors caused by user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Config(_) | Error::ModelMismatch(_) | Error::Data(_)
        )
    }
}
