use std::path::PathBuf;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension error in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("numeric error in {op}: {detail}")]
    Numeric { op: &'static str, detail: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("structure error: {0}")]
    Structure(String),

    #[error("format error in {path}: line {line}: {detail}")]
    Format {
        path: String,
        line: usize,
        detail: String,
    },

    #[error("generation error: {0}")]
    Generation(String),

    #[error("integration error: {0}")]
    Integration(String),

    #[error("training diverged at epoch {epoch} (last finite epoch: {last_finite_epoch:?}): {detail}")]
    Diverged {
        epoch: usize,
        last_finite_epoch: Option<usize>,
        detail: String,
    },

    #[error("all {count} grid points failed: {causes}")]
    GridExhausted { count: usize, causes: String },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("invalid experiment config:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
