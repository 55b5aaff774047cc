//! Error type shared across the crate.

use thiserror::Error;

/// Errors raised by evaluators, scans and the construction engine.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("input outside the validity domain: {0}")]
    OutOfValidity(String),
    #[error("value exceeds floating-point range: {0}")]
    Overflow(String),
    #[error("operation unsupported for this function family: {0}")]
    Unsupported(String),
    #[error("denominator too close to zero: {0}")]
    NearZeroDivision(String),
    #[error("characteristic too small (requires T > e): T = {0}")]
    DegenerateT(f64),
    #[error("cannot normalize to f(0) = 1: {0}")]
    NormalizationError(String),
    #[error("zero within {dist:.3e} of the contour |z| = {radius:.6e}")]
    ZeroOnContour { radius: f64, dist: f64 },
    #[error("contour integral {0} is not within 0.1 of an integer")]
    NonIntegerResidue(f64),
    #[error("quadrature failed to converge after {0} refinements")]
    NonConvergence(usize),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("disk construction violated its radius budget: {0}")]
    BudgetExceeded(String),
    #[error("radius {0:.6e} fails the good-radius test")]
    BadRadius(f64),
    #[error("no grid sample satisfies the candidate-set tests")]
    EmptyCandidate,
    #[error("every candidate sample is covered by an exclusion disk")]
    EmptyAfterExclusion,
    #[error("Newton iteration did not converge within {0} steps")]
    NoConvergence(usize),
    #[error("inverse branch converged outside the branch window (Im = {0:.6e})")]
    WrongBranch(f64),
    #[error("derivative vanishes at the seed (|f'(seed)| = {0:.3e})")]
    CriticalSeed(f64),
    #[error("cascade level {level} unreachable: {reason}")]
    DepthUnreachable { level: usize, reason: String },
    #[error("box-count fit is degenerate: {0}")]
    DegenerateFit(String),
    #[error("window {0} contains no flagged cell at the coarsest scale")]
    EmptyWindow(usize),
    #[error("requested resolution {0} exceeds the cap of 8192 per side")]
    ResolutionCap(usize),
    #[error("map is not injective on the sample set: images {0:.3e} apart")]
    InjectivityViolation(f64),
    #[error("precondition failed [{check}]: {detail}")]
    Precondition { check: &'static str, detail: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
