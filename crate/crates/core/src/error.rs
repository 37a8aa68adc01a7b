use std::fmt;
use std::io;

use serde::{Deserialize, Serialize};

use crate::model::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the core library can report.
///
/// Each variant maps to exactly one [`ErrorCode`], which is what the HTTP
/// layer and the CLI surface to callers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("not found: {0}")]
    NotFound(String),

    #[error("no schema registered for object type `{0}`")]
    SchemaNotFound(String),

    #[error("validation failed: {0}")]
    Validation(Box<ValidationReport>),

    #[error("linking {parent} -> {child} would create a cycle")]
    Cycle { parent: String, child: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("truncated input: {0}")]
    Truncated(String),

    #[error("invalid text encoding: {0}")]
    Encoding(String),

    #[error("unsupported value type 0x{type_code:02x} for key `{key}`")]
    BadType { key: String, type_code: u8 },

    #[error("syntax error on line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("missing header key `{0}`")]
    Header(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("term `{term}` is not in vocabulary {vocabulary}")]
    Vocab { vocabulary: String, term: String },

    #[error("blob {0} failed content verification")]
    Corrupt(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },

    #[error("journal: {0}")]
    Journal(String),

    #[error("busy: {0}")]
    Busy(String),
}

impl Error {
    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn syntax(line: usize, message: impl Into<String>) -> Self {
        Error::Syntax {
            line,
            message: message.into(),
        }
    }

    pub fn code(&self) -> ErrorCode {
        match self {
            Error::NotFound(_) => ErrorCode::NotFound,
            Error::SchemaNotFound(_) => ErrorCode::SchemaNotFound,
            Error::Validation(_) => ErrorCode::Validation,
            Error::Cycle { .. } => ErrorCode::Cycle,
            Error::Parse(_) => ErrorCode::Parse,
            Error::Truncated(_) => ErrorCode::Truncated,
            Error::Encoding(_) => ErrorCode::Encoding,
            Error::BadType { .. } => ErrorCode::BadType,
            Error::Syntax { .. } => ErrorCode::Syntax,
            Error::Header(_) => ErrorCode::Header,
            Error::Shape(_) => ErrorCode::Shape,
            Error::Domain(_) => ErrorCode::Domain,
            Error::Empty(_) => ErrorCode::Empty,
            Error::Vocab { .. } => ErrorCode::Vocab,
            Error::Corrupt(_) => ErrorCode::Corrupt,
            Error::Io { .. } => ErrorCode::Io,
            Error::Journal(_) => ErrorCode::Journal,
            Error::Busy(_) => ErrorCode::Busy,
        }
    }

    /// The validation report carried by a [`Error::Validation`].
    pub fn validation_report(&self) -> Option<&ValidationReport> {
        match self {
            Error::Validation(report) => Some(report),
            _ => None,
        }
    }
}

/// Stable, wire-visible error identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    #[serde(rename = "NOTFOUND")]
    NotFound,
    SchemaNotFound,
    Validation,
    Cycle,
    Parse,
    Truncated,
    Encoding,
    #[serde(rename = "BADTYPE")]
    BadType,
    Syntax,
    Header,
    Shape,
    Domain,
    Empty,
    Vocab,
    Corrupt,
    Io,
    Journal,
    Busy,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 18] = [
        ErrorCode::NotFound,
        ErrorCode::SchemaNotFound,
        ErrorCode::Validation,
        ErrorCode::Cycle,
        ErrorCode::Parse,
        ErrorCode::Truncated,
        ErrorCode::Encoding,
        ErrorCode::BadType,
        ErrorCode::Syntax,
        ErrorCode::Header,
        ErrorCode::Shape,
        ErrorCode::Domain,
        ErrorCode::Empty,
        ErrorCode::Vocab,
        ErrorCode::Corrupt,
        ErrorCode::Io,
        ErrorCode::Journal,
        ErrorCode::Busy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::NotFound => "NOTFOUND",
            ErrorCode::SchemaNotFound => "SCHEMA_NOT_FOUND",
            ErrorCode::Validation => "VALIDATION",
            ErrorCode::Cycle => "CYCLE",
            ErrorCode::Parse => "PARSE",
            ErrorCode::Truncated => "TRUNCATED",
            ErrorCode::Encoding => "ENCODING",
            ErrorCode::BadType => "BADTYPE",
            ErrorCode::Syntax => "SYNTAX",
            ErrorCode::Header => "HEADER",
            ErrorCode::Shape => "SHAPE",
            ErrorCode::Domain => "DOMAIN",
            ErrorCode::Empty => "EMPTY",
            ErrorCode::Vocab => "VOCAB",
            ErrorCode::Corrupt => "CORRUPT",
            ErrorCode::Io => "IO",
            ErrorCode::Journal => "JOURNAL",
            ErrorCode::Busy => "BUSY",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
