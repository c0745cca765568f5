use thiserror::Error;

/// Errors raised by the window algebra, forward model and solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("window `{id}` has zero total length")]
    DegenerateWindow { id: String },

    #[error("window `{id}`: {reason}")]
    InvalidInterval { id: String, reason: String },

    #[error("window `{id}` leaves the horizon [{start}, {end})")]
    OutsideHorizon { id: String, start: f64, end: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("family of {members} members exceeds the exhaustive cap of {cap}")]
    TooLarge { members: u64, cap: u64 },

    #[error("window {window} has zero time mass")]
    NullWindowMass { window: usize },

    #[error("window distribution system is constant; time weights are not identifiable")]
    ConstantWds,

    #[error("atom {atom} cannot be reached by the mixture-ratio chain")]
    UnchainableAtom { atom: usize },

    #[error("atom {atom} is not covered by any window")]
    UncoveredAtom { atom: usize },

    #[error("objective became non-finite at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    #[error("household {household}: fewer than two meter readings")]
    InsufficientReadings { household: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
