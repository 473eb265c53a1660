use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ball radius {radius} exceeds 1/2 and would wrap onto itself")]
    RadiusTooLarge { radius: f64 },

    #[error("ellipticity violated at cell {cell}: {reason}")]
    Ellipticity { cell: usize, reason: String },

    #[error("functional calculus is unreliable for this operator: {0}")]
    Calculus(String),

    #[error("subordination quadrature did not converge (tail estimate {estimate:.3e}); retry with at least {suggested_nodes} nodes")]
    Quadrature {
        estimate: f64,
        suggested_nodes: usize,
    },

    #[error("operator too large for dense functional calculus: {size} unknowns (limit {limit})")]
    TooLarge { size: usize, limit: usize },

    #[error("degenerate ball family: {0}")]
    DegenerateFamily(String),

    #[error("malformed binary field: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
