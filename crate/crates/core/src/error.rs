use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while building, parsing or persisting a system model.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed model XML: {0}")]
    XmlSyntax(String),

    #[error("IR syntax error on line {line}: {message}")]
    IrSyntax { line: usize, message: String },

    #[error("unknown node `{name}` ({context})")]
    UnknownNodeRef { name: String, context: String },

    #[error("cycle detected: {}", .cycle.join(" -> "))]
    CycleDetected { cycle: Vec<String> },

    #[error("duplicate node `{0}`")]
    DuplicateNode(String),

    #[error("duplicate edge `{0} --> {1}`")]
    DuplicateEdge(String, String),

    #[error("invalid node name `{0}`")]
    InvalidName(String),

    #[error("invalid attribute `{key}` on node `{node}`: {reason}")]
    InvalidAttribute {
        node: String,
        key: String,
        reason: String,
    },

    #[error("bad gate expression `{expr}`: {reason}")]
    BadGateExpr { expr: String, reason: String },

    #[error("k-out-of-n gate with k={k} is out of range for n={n}")]
    KOutOfRange { k: usize, n: usize },

    #[error("node `{0}` has no inputs and cannot carry a gate")]
    GateOnSource(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ModelError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ModelError::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("unknown node `{0}`")]
    UnknownNodeRef(String),

    #[error("model has no {0} node; mark nodes with start=\"true\" and end=\"true\"")]
    NoStartOrEnd(&'static str),
}

#[derive(Debug, Error)]
pub enum MutationError {
    #[error("unknown node `{0}`")]
    UnknownNodeRef(String),

    #[error("replica name `{0}` already exists in the model")]
    NameCollision(String),

    #[error("`{0}` is the only node of the model; replicating it gives no redundancy")]
    TrivialModel(String),

    #[error("replication needs at least 2 copies, got {0}")]
    InvalidCopies(usize),

    #[error(transparent)]
    Analysis(#[from] AnalysisError),

    #[error("mutated model is invalid: {0}")]
    Model(#[from] ModelError),
}
