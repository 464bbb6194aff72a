use thiserror::Error;

/// Errors raised by the LP engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
    #[error("lower bound {lower} exceeds upper bound {upper} for column {col}")]
    Bounds { col: usize, lower: f64, upper: f64 },
    #[error("basis is numerically singular and could not be repaired")]
    Singular,
    #[error("LP relaxation is unbounded (column {0} reached an artificial bound)")]
    Unbounded(usize),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Errors raised while reading an MPS file.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown row `{name}`")]
    UnknownRow { line: usize, name: String },
    #[error("line {line}: duplicate row `{name}`")]
    DuplicateRow { line: usize, name: String },
    #[error("line {line}: unknown column `{name}`")]
    UnknownColumn { line: usize, name: String },
    #[error("line {line}: unknown section `{name}`")]
    UnknownSection { line: usize, name: String },
    #[error("missing objective row")]
    NoObjective,
    #[error(transparent)]
    Model(#[from] LpError),
}

/// Errors raised by the cost memories.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("node {0} is not in the extended tree")]
    UnknownNode(usize),
    #[error("node belongs to session {got}, tree is session {expected}")]
    ForeignNode { expected: u64, got: u64 },
}

/// Errors surfaced by the branch-and-bound driver and the benchmark harness.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
