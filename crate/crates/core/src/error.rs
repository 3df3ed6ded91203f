use core::fmt;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Grid axioms checked by [`crate::distortion::GridSpec`] construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridAxiom {
    /// The level does not cover the base interval.
    Cover,
    /// Endpoints are not strictly increasing (overlapping interiors).
    DisjointInteriors,
    /// An interval is degenerate relative to the base interval.
    Degenerate,
    /// A coarse endpoint is missing from the next level.
    Nesting,
    /// An interval has fewer than two children.
    Children,
}

impl fmt::Display for GridAxiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let id = match self {
            GridAxiom::Cover => "i",
            GridAxiom::DisjointInteriors => "iii",
            GridAxiom::Degenerate => "vi",
            GridAxiom::Nesting => "v",
            GridAxiom::Children => "vii",
        };
        f.write_str(id)
    }
}

/// Every failure the numerical kernels can report.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("degree must be at least 2, got {0}")]
    InvalidDegree(u32),
    #[error("digit {digit} out of range for degree {degree}")]
    InvalidDigit { digit: u32, degree: u32 },
    #[error("value {value} does not fit in {depth} base-{degree} digits")]
    Overflow { value: u64, degree: u32, depth: usize },
    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(u32, u32),
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
    #[error("NonPositive({index})")]
    NonPositive { index: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("degenerate input: every difference vanishes")]
    Degenerate,
    #[error("depth {depth} exceeds available depth {max}")]
    DepthExceeded { depth: usize, max: usize },
    #[error("window too narrow for coarse index {index}")]
    WindowTooNarrow { index: i64 },
    #[error("Inconsistent: residual {residual:e} exceeds tolerance {tolerance:e}")]
    Inconsistent { residual: f64, tolerance: f64 },
    #[error("NoConvergence: root solve did not converge near {near}")]
    NoConvergence { near: f64 },
    #[error("level {level} needs {intervals} intervals, cap is {cap}")]
    CapExceeded { level: usize, intervals: u64, cap: u64 },
    #[error("intervals are not adjacent")]
    NotAdjacent,
    #[error("point {0} outside the homeomorphism domain")]
    DomainViolation(f64),
    #[error("GridAxiomViolation({axiom}) at level {level}")]
    GridAxiomViolation { axiom: GridAxiom, level: usize },
    #[error("too few levels: {got} (need {need})")]
    TooFewLevels { got: usize, need: usize },
    #[error("invalid map: {0}")]
    InvalidMap(&'static str),
    #[error("invalid homeomorphism: {0}")]
    InvalidHomeomorphism(&'static str),
}

impl Error {
    /// True for failures caused by the numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NoConvergence { .. } | Error::Inconsistent { .. })
    }
}
