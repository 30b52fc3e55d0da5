use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("singular matrix")]
    Singular,
    #[error("ill-conditioned: {0}")]
    IllConditioned(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerically unstable: {0}")]
    Instability(String),
}

impl Error {
    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::Precondition(_) | Error::Config(_))
    }
}
