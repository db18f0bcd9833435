use thiserror::Error;

/// Errors raised by the solver and its tooling.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter `{name}` out of range: {value} ({rule})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        rule: &'static str,
    },

    #[error("invalid grid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("fields are defined on different grids")]
    GridMismatch,

    #[error("negative initial data {value:e} at node (i={i}, j={j}, k={k})")]
    NegativeInitialData {
        i: usize,
        j: usize,
        k: usize,
        value: f64,
    },

    #[error("negative distribution value {value:e} in cell {cell}")]
    NegativeField { cell: usize, value: f64 },

    #[error("vacuum cell {cell}: discrete mass {mass:e} below threshold")]
    ZeroDensity { cell: usize, mass: f64 },

    #[error("temperature tensor is not positive definite (cell {cell}, pivot {pivot})")]
    NonSpdTensor { cell: usize, pivot: usize },

    #[error("nonpositive relaxation temperature {t_theta:e} in cell {cell}")]
    DegenerateTemperature { cell: usize, t_theta: f64 },

    #[error("tensor bound violated along k={direction:?}: margin {margin:e}")]
    BoundViolated { direction: [f64; 3], margin: f64 },

    #[error("stability envelope {which} violated at step {step}, node {node:?}: {detail}")]
    EnvelopeViolated {
        which: &'static str,
        step: usize,
        node: Option<(usize, usize, usize)>,
        detail: String,
    },

    #[error("degenerate convergence table: {0}")]
    DegenerateTable(String),

    #[error("step {step} failed: {source}")]
    StepFailed { step: usize, source: Box<Error> },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("snapshot format: {0}")]
    Snapshot(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl Error {
    /// Rewrites the cell index of a per-cell error.
    pub(crate) fn at_cell(self, cell: usize) -> Self {
        match self {
            Error::ZeroDensity { mass, .. } => Error::ZeroDensity { cell, mass },
            Error::NonSpdTensor { pivot, .. } => Error::NonSpdTensor { cell, pivot },
            Error::DegenerateTemperature { t_theta, .. } => {
                Error::DegenerateTemperature { cell, t_theta }
            }
            Error::NegativeField { value, .. } => Error::NegativeField { cell, value },
            other => other,
        }
    }

    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
