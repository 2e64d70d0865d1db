use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("invalid automaton: {0}")]
    InvalidAutomaton(String),
    #[error("query is not hierarchical: {0}")]
    NotHierarchical(String),
    #[error("cannot compile query: {0}")]
    Compile(String),
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
    #[error("at stream position {position}: {source}")]
    AtPosition {
        position: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    pub fn at_position(self, position: usize) -> Self {
        Error::AtPosition {
            position,
            source: Box::new(self),
        }
    }

    /// The innermost error, with position wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtPosition { source, .. } => source.root(),
            other => other,
        }
    }
}
