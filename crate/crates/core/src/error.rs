use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("ill-conditioned problem: {0}")]
    IllConditioned(String),

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("infeasible design, binding constraint: {0}")]
    Infeasible(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Validation(msg()))
    }
}
