use thiserror::Error;

/// Errors raised by the tracking, planning and evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent detection/pose stream data.
    #[error("{}", format_stream_error(.line, .field, .message))]
    StreamFormat {
        line: Option<usize>,
        field: String,
        message: String,
    },

    #[error("evaluation input: {0}")]
    Evaluation(String),

    #[error("planning: {0}")]
    Planning(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_stream_error(line: &Option<usize>, field: &str, message: &str) -> String {
    match line {
        Some(line) => format!("line {line}: field `{field}`: {message}"),
        None => format!("field `{field}`: {message}"),
    }
}

impl Error {
    pub(crate) fn stream(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::StreamFormat {
            line: None,
            field: field.into(),
            message: message.into(),
        }
    }

    /// Attaches a 1-based input line number to a stream error.
    pub(crate) fn at_line(self, line: usize) -> Self {
        match self {
            Error::StreamFormat { field, message, .. } => Error::StreamFormat {
                line: Some(line),
                field,
                message,
            },
            other => other,
        }
    }

    /// True for errors caused by input data rather than usage.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Config(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
