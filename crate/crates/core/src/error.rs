use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix is rank deficient (zero pivot at column {column})")]
    RankDeficient { column: usize },

    #[error("eigensolver did not converge after {matvecs} matrix-vector products (residual {residual:e})")]
    NoConvergence { matvecs: usize, residual: f64 },

    #[error("gap scan failed at s = {s}: {source}")]
    ScanPoint {
        s: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("curve fit failed: {0}")]
    FitFailed(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid record {record}: {message}")]
    InvalidRecord { record: usize, message: String },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Attach a pipeline stage label to an error.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_syntax() || e.is_data() || e.is_eof() {
            Error::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            }
        } else {
            Error::Json(e)
        }
    }
}
