use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file; `line` and `column` are 1-based when known.
    #[error("{path}:{}{}: {message}", line.map(|l| l.to_string()).unwrap_or_else(|| "?".into()), column.map(|c| format!(":{c}")).unwrap_or_default())]
    Parse {
        path: PathBuf,
        line: Option<u64>,
        column: Option<usize>,
        message: String,
    },

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("panel empty after cleaning")]
    EmptyAfterCleaning,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("silhouette undefined for {0} cluster(s); need at least 2")]
    SilhouetteUndefined(usize),

    #[error("no admissible clustering")]
    NoAdmissibleClustering,

    #[error("R² undefined: target has zero variance")]
    ZeroVariance,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),

    /// Pipeline failure tagged with the stage that produced it.
    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by unreadable or malformed input files rather
    /// than by the analysis itself.
    pub fn is_input_failure(&self) -> bool {
        match self {
            Error::Io { .. } | Error::Parse { .. } | Error::Config(_) => true,
            Error::Stage { source, .. } => source.is_input_failure(),
            _ => false,
        }
    }

    /// Tags the error with the pipeline stage that raised it; an existing tag is kept.
    pub fn at_stage(self, stage: &'static str) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }
}
