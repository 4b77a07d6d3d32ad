use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{0}` must be strictly positive and finite")]
    NonPositiveParameter(&'static str),

    #[error("derived length constant xi = eps1*h^2/(12*eps3) underflows to zero")]
    DegenerateXi,

    #[error("grid with {0} cells is too coarse (need at least 8)")]
    GridTooCoarse(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot parse configuration: {0}")]
    ConfigParse(String),

    #[error("field `{field}` has length {found}, expected {expected}")]
    DimensionMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("factorization failed: {0}")]
    SolverFailure(&'static str),

    #[error("shifted midpoint system is singular")]
    LinearSolveFailure,

    #[error("gauge residual {residual:e} exceeds tolerance {tolerance:e}")]
    GaugeViolation { residual: f64, tolerance: f64 },

    #[error("gauge residual {residual:e} at step {step} exceeds drift limit {limit:e}")]
    GaugeDrift { step: usize, residual: f64, limit: f64 },

    #[error("midpoint defect {defect:e} at step {step} exceeds solver tolerance {tolerance:e}")]
    SolverDefect { step: usize, defect: f64, tolerance: f64 },

    #[error("skewness certificate {residual:e} exceeds {tolerance:e}")]
    AssemblyInconsistent { residual: f64, tolerance: f64 },

    #[error("energy Gram matrix is not positive definite on the constrained subspace")]
    NotPositiveDefinite,

    #[error("state dimension {0} exceeds the dense eigensolver guard")]
    TooLarge(usize),

    #[error("decay fit window holds {0} records, need at least 10")]
    DegenerateWindow(usize),

    #[error("non-positive energy {0:e} at the start of the fit window")]
    NonPositiveEnergy(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
