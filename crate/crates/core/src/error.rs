use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// One or more configuration constraints failed. All violations are
    /// collected before reporting.
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("full-pilot zero-forcing needs more antennas than pilots (N = {antennas}, tau_p = {pilots})")]
    ZeroForcingDimension { antennas: usize, pilots: usize },

    #[error("pilot Gram matrix at cell {cell} is numerically rank deficient")]
    RankDeficient { cell: usize },

    #[error("invalid rank set: {0}")]
    InvalidRankSet(String),

    #[error("coefficient vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("{value} is outside the action interval [{lo}, {hi}] of branch {branch}")]
    ActionOutOfBounds {
        branch: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("p = {p} is not in 1..={size}")]
    InvalidCenterCount { p: usize, size: usize },

    #[error("k = {k} is not in 1..={sites}")]
    InvalidClusterCount { k: usize, sites: usize },

    #[error("malformed weight dump: {0}")]
    WeightFormat(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(vec![msg.into()])
    }
}
