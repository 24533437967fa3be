use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input contains non-finite values")]
    NonFinite,

    #[error("matrix has no nonzero rows")]
    ZeroMatrix,

    #[error("row {0} has zero norm")]
    ZeroRow(usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("norm bound {bound} violated by candidate with squared norm {norm_sq}")]
    BoundViolation { bound: f64, norm_sq: f64 },

    #[error("rejection sampler exhausted {0} attempts without acceptance")]
    RejectionExhausted(usize),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the CLI: 2 for configuration problems,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::Config(_)
            | Error::Parse(_)
            | Error::Dimension(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
            _ => 3,
        }
    }
}
