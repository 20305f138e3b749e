use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid size {0}: permutations need n >= 1")]
    InvalidSize(usize),

    #[error("not a permutation of 1..={n}: {reason}")]
    NotAPermutation { n: usize, reason: String },

    #[error("cannot parse permutation: token {index} ({token:?}) {reason}")]
    Parse {
        index: usize,
        token: String,
        reason: String,
    },

    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("{what}: n = {n} exceeds the cap of {cap}")]
    TooLarge { what: &'static str, n: usize, cap: usize },

    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    #[error("outside the regime where the bound is stated: {0}")]
    Regime(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
