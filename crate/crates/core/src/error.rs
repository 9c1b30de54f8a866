use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the physical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration block or chain stage is malformed.
    #[error("configuration error in {context}: {message}")]
    Config { context: String, message: String },

    /// The measurement cannot be explained by any value inside the search bracket.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A numerical solver failed to converge or violated its own tolerance.
    #[error("solver failure: {0}")]
    Solver(String),

    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            context: context.into(),
            message: message.into(),
        }
    }
}
