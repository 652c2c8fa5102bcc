use std::path::PathBuf;

/// Crate-wide error type. Stage code converts lower-level failures into one
/// of these variants so the CLI can print a single coherent message.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {malformed} of {total} data lines are malformed (over the 10% ceiling)")]
    CorruptInput {
        path: PathBuf,
        malformed: usize,
        total: usize,
    },

    #[error("registry error: {0}")]
    Registry(String),

    #[error("calendar error: {0}")]
    Calendar(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("stage `{stage}` needs {path}, which has not been produced yet; run the earlier stage first")]
    MissingArtifact { stage: String, path: PathBuf },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
