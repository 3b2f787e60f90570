use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The coupling matrix could not be inverted reliably at one grid point.
    #[error(
        "coupling matrix is singular (condition number {condition:.3e}) at delta = {delta_mhz} MHz, loop phase = {loop_phase} rad"
    )]
    SingularMatrix {
        condition: f64,
        delta_mhz: f64,
        loop_phase: f64,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("band gap closes (gap {gap:.3e} at k = {k})")]
    DegenerateBand { gap: f64, k: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("nonpositive background value {value} at index {index}")]
    NonPositiveBackground { index: usize, value: f64 },

    #[error("degenerate background line: {0}")]
    DegenerateBackground(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("fit did not converge in {stage}: {iterations} iterations, residual norm {residual_norm:.6e}")]
    FitNonConvergence {
        stage: String,
        iterations: usize,
        residual_norm: f64,
    },

    #[error("rank-deficient normal equations; null-space combinations: {}", .combinations.join("; "))]
    RankDeficient { combinations: Vec<String> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
