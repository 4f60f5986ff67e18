use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// The config file is not valid TOML or has unknown fields.
    #[error("{}: {message}", .path.display())]
    Config { path: PathBuf, message: String },
    /// A library error, prefixed with the file or model it concerns.
    #[error("{context}: {source}")]
    Core {
        context: String,
        source: irradcast::Error,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("no model named `{0}`")]
    UnknownModel(String),
    #[error("every model failed to fit ({0} attempted)")]
    AllFitsFailed(usize),
    #[error("{0} model(s) failed; see the report")]
    PartialFailure(usize),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub trait Context<T> {
    fn context(self, what: impl std::fmt::Display) -> CliResult<T>;
}

impl<T> Context<T> for irradcast::Result<T> {
    fn context(self, what: impl std::fmt::Display) -> CliResult<T> {
        self.map_err(|source| CliError::Core {
            context: what.to_string(),
            source,
        })
    }
}

pub fn io_error(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
