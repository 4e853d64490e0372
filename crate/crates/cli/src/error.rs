use thiserror::Error;

/// A configuration problem together with where it was found.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{location}: {message}")]
pub struct ConfigError {
    /// `file:line:column` or `file: [section].key`.
    pub location: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            location: location.into(),
            message: message.into(),
        }
    }
}
