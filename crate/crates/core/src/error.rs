use std::path::PathBuf;

use thiserror::Error;

/// Invalid parameters, scenario files or planner configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("malformed override `{0}`, expected key=value")]
    MalformedOverride(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario file {path}: {message}")]
    Scenario { path: PathBuf, message: String },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Crowd(#[from] CrowdError),
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum GridError {
    #[error("line {line}: malformed header, expected `<width> <height> <resolution>`")]
    Header { line: usize },
    #[error("line {line}: expected {expected} cells, found {found}")]
    RowLength { line: usize, expected: usize, found: usize },
    #[error("line {line}: illegal character {ch:?} at column {column}")]
    IllegalChar { line: usize, column: usize, ch: char },
    #[error("line {line}: expected {expected} rows, found {found}")]
    RowCount { line: usize, expected: usize, found: usize },
    #[error("grid dimensions or cell values are invalid: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum CrowdError {
    #[error("crowd csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("crowd csv line {line}: {message}")]
    Record { line: u64, message: String },
}

/// A probability argument outside `[0, 1]`.
#[derive(Debug, Error, PartialEq)]
#[error("probability {value} outside [0, 1]")]
pub struct RiskError {
    pub value: f64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("node {0} is not in the tree")]
    UnknownNode(u32),
    #[error("node would exceed the depth limit of {0}")]
    DepthExceeded(usize),
    #[error("node {0} is not a child of the root")]
    NotRootChild(u32),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ForestError {
    #[error("structure is empty")]
    Empty,
    #[error("sub-tree {0} does not exist")]
    UnknownSubTree(u32),
    #[error("cannot merge sub-tree {0} into itself")]
    SelfMerge(u32),
    #[error("node {node} is not part of sub-tree {subtree}")]
    NodeNotFound { subtree: u32, node: u32 },
}

/// Structural invariant violations found by the audit routines.
#[derive(Debug, Error, PartialEq)]
#[error("audit failed: {0}")]
pub struct AuditError(pub String);
