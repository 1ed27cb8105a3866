use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("rows are not bijections onto a common alphabet: {0}")]
    NotABijection(String),
    #[error("permutation is reducible: the first {k} letters of both rows coincide")]
    Reducible { k: usize },
    #[error("kernel dimension and alphabet size have inconsistent parity (d={d}, kernel={kernel_dim})")]
    InconsistentParity { d: usize, kernel_dim: usize },
    #[error("length of letter {letter} is not positive")]
    NonPositiveLength { letter: usize },
    #[error("breakpoints closer than the separation floor 2^-{floor_bits}")]
    PrecisionExhausted { floor_bits: u32 },
    #[error("competing lengths tie within the separation floor; the Rauzy step is undefined")]
    TieBreakUndefined,
    #[error("Zorich step exceeded the cap of {cap} Rauzy steps")]
    StepCapExceeded { cap: usize },
    #[error("path is not composable at edge {index}")]
    NonComposablePath { index: usize },
    #[error("matrix has a non-positive entry at ({row}, {col})")]
    NonPositiveEntry { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("permutation must send the last top letter to the first bottom slot")]
    BadPermutationShape,
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("stopping time exceeded the bound 2p-1 = {bound}")]
    BoundViolated { bound: usize },
    #[error("suspension interval {index} is degenerate")]
    DegenerateInterval { index: usize },
    #[error("angle {0} is outside (0, pi/2)")]
    OutOfDomain(f64),
    #[error("gluing inconsistency: {0}")]
    NonMatchingBreakpoints(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
