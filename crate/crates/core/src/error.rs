use std::path::PathBuf;

/// Errors surfaced by the library and the command line front end.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV input: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("unknown label {label:?} (known classes: {known:?})")]
    UnknownLabel { label: String, known: Vec<String> },

    #[error("corpus is empty after filtering")]
    EmptyCorpus,

    #[error("training requires at least two classes, found {0}")]
    SingleClass(usize),

    #[error("duplicate document id {0:?}")]
    DuplicateDocument(String),

    #[error("predictor failure: {0}")]
    Predictor(String),

    #[error("perturbator failure: {0}")]
    Perturbator(String),

    #[error("run interrupted: {0}")]
    Interrupted(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for configuration or input problems, 3 for
    /// failures that happen while a run is underway.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Config(_)
            | Error::Input(_)
            | Error::UnknownLabel { .. }
            | Error::EmptyCorpus
            | Error::SingleClass(_)
            | Error::DuplicateDocument(_) => 2,
            Error::Predictor(_) | Error::Perturbator(_) | Error::Interrupted(_) => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
