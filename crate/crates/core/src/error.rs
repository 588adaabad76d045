use thiserror::Error;

/// Errors raised by the solvers, diagnostics and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid too small: axis {axis} has {n} cells (need at least 4)")]
    GridTooSmall { axis: usize, n: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unknown boundary kind `{0}`")]
    UnknownBoundary(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid state at cell {cell}: {reason}")]
    InvalidState { cell: usize, reason: String },

    #[error("positivity lost at t = {t}, cell {cell}: {reason}")]
    PositivityLoss { t: f64, cell: usize, reason: String },

    #[error("non-finite input to {0}")]
    NonFinite(&'static str),

    #[error("Poisson solver did not converge after {iterations} iterations (residual {residual:e})")]
    PoissonNotConverged { iterations: usize, residual: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("time {tau} outside recorded range [{t_min}, {t_max}]")]
    OutOfRange { tau: f64, t_min: f64, t_max: f64 },

    #[error("snapshots misaligned: t = {t_a} vs t = {t_b}")]
    Misaligned { t_a: f64, t_b: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
