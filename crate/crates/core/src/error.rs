use thiserror::Error;

pub type Result<T> = std::result::Result<T, EscError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EscError {
    /// A configuration value violates one of the model invariants.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A history buffer was written twice for the same channel within one step.
    #[error("channel {channel} pushed twice within one step")]
    DoublePush { channel: usize },

    /// A state update produced a non-finite value.
    #[error("non-finite state in {0}")]
    NonFinite(&'static str),

    #[error("trajectory comparison failed: {0}")]
    Comparison(String),

    #[error("scenario parse error: {0}")]
    Parse(String),
}

impl EscError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        EscError::Config(msg.into())
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(EscError::Dimension {
            context,
            expected,
            got,
        })
    }
}
