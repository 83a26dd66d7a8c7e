use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is missing, malformed or violates an invariant.
    /// `key` is the dotted path into the configuration document.
    #[error("configuration error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("numerical failure{}: {msg}", channel_suffix(.channel))]
    Numerical { msg: String, channel: Option<String> },

    /// Caller handed in objects that do not belong together (different grids,
    /// channels, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed file: {msg}")]
    Format { path: PathBuf, msg: String },
}

fn channel_suffix(channel: &Option<String>) -> String {
    match channel {
        Some(c) => format!(" in channel {c}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { key: key.into(), msg: msg.into() }
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical { msg: msg.into(), channel: None }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format { path: path.into(), msg: msg.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
