use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown model `{0}` (available: {available})", available = crate::models::MODEL_IDS.join(", "))]
    UnknownModel(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("smooth coordinate {0} has no drift path from any rough coordinate (connexity violated)")]
    Connexity(usize),

    #[error("state exploded at step {step} (|z| > 1e8 or non-finite)")]
    Explosion { step: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix not positive definite in {0}")]
    NotPositiveDefinite(&'static str),

    #[error("initial condition not identifiable: E_0 is singular")]
    SingularInitial,

    #[error("rank condition violated: noise covariance singular at window {index}")]
    RankCondition { index: usize },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("input error: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numerical or estimation failure, as opposed to bad usage or input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Connexity(_)
                | Error::Explosion { .. }
                | Error::NonFinite(_)
                | Error::NotPositiveDefinite(_)
                | Error::SingularInitial
                | Error::RankCondition { .. }
                | Error::Estimation(_)
        )
    }
}
