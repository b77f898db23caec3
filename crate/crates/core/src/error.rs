use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty point set")]
    EmptyPointSet,

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite coordinate at point {point}")]
    NonFinite { point: usize },

    #[error("k = {k} out of range 1..={n}")]
    KOutOfRange { k: usize, n: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no closed form for this distribution pair")]
    NoClosedForm,

    #[error("unsupported distribution pair: {0}")]
    UnsupportedPair(String),

    #[error("radius search exceeded cap: mass {mass} < {target} at r = {radius}")]
    RadiusSearchFailed { target: f64, mass: f64, radius: f64 },

    #[error("transfer function diverges at gamma = {gamma}")]
    Divergent { gamma: f64 },

    #[error("both training samples are empty")]
    EmptyTraining,

    #[error("invalid label at index {index}: labels must be finite")]
    NonFiniteLabel { index: usize },

    #[error("slope fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error("slope fit requires positive values; got {value} at index {index}")]
    NonPositive { index: usize, value: f64 },

    #[error("cell (n = {n}, m = {m}): {source}")]
    Cell {
        n: usize,
        m: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("missing transfer value for the {0} term")]
    MissingTransfer(&'static str),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
