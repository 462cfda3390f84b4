use thiserror::Error;

/// Errors raised by the region calculator, the chain builder and the oracle.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DofError {
    #[error("antenna ratio M/N = {0} is out of scope (need 1 < M/N < 2, or M = N)")]
    RatioOutOfScope(String),
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
    #[error("branch DoF is zero for tree length L = {0}")]
    DegenerateRegime(u32),
    #[error("redistribution factor a{index} = {value} is outside [0, {bound}]")]
    FactorOutOfRange {
        index: usize,
        value: String,
        bound: String,
    },
    #[error("redistribution equations need L mod 3 = 1, got L = {0}")]
    WrongRegime(u32),
    #[error("degenerate channel draw: chain null space has dimension {found}, expected {expected}")]
    DegenerateChannels { expected: usize, found: usize },
    #[error("tree rooted at transmitter {root} needs {requested} branches, only {available} available")]
    InsufficientBranches {
        root: usize,
        requested: usize,
        available: usize,
    },
    #[error("target {0} is not reachable by any tree allocation")]
    InfeasibleTarget(String),
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("cannot parse {0:?} as a rational number")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, DofError>;
