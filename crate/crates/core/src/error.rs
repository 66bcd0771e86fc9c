use std::fmt;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Where in a problem document an error was found, e.g. `gates[2].args`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location(pub String);

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("value {value} out of range [0, {max}]")]
    Range { value: i64, max: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{location}: {message}")]
    Schema { location: Location, message: String },

    #[error("{location}: unknown op `{op}`")]
    UnknownOp { location: Location, op: String },

    #[error("{location}: `{op}` takes {expected} argument(s), got {got}")]
    Arity {
        location: Location,
        op: String,
        expected: usize,
        got: usize,
    },

    #[error("combinational cycle through gate(s): {0}")]
    Cycle(String),

    #[error("missing input stream `{0}`")]
    MissingInput(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("expected {expected} sequence(s), got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("expression error at offset {offset}: {message}")]
    Expression { offset: usize, message: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("infeasible assignment: constraint `{constraint}` violated ({detail})")]
    Infeasible { constraint: String, detail: String },

    #[error("internal consistency failure: {0}")]
    Consistency(String),

    #[error("LP parse error on line {line}: {message}")]
    LpParse { line: usize, message: String },

    #[error("{0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn schema(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            location: Location(location.into()),
            message: message.into(),
        }
    }
}
