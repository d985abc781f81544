use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate rectangle {width} x {height}")]
    DegenerateDomain { width: f64, height: f64 },

    #[error("a spectral basis needs at least one mode")]
    EmptyBasis,

    #[error("ground eigenvalue {lambda1} is not simple")]
    DegenerateGroundState { lambda1: f64 },

    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("controller dimension {n} needs a basis larger than {count} modes")]
    BasisTooSmall { n: usize, count: usize },

    #[error("singular lifting: |k_{i} - lambda_{j}| = {value:e} below floor {floor:e}")]
    SingularLifting { i: usize, j: usize, value: f64, floor: f64 },

    #[error("mB - C is ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("tail sum for zeta did not converge: relative increment {increment:e} > {tol:e}")]
    TailNotConverged { increment: f64, tol: f64 },

    #[error("tuning parameter m = {m} must exceed 1/2")]
    TuningTooSmall { m: f64 },

    #[error("no certified controller dimension up to N = {n_max}")]
    NotFound {
        n_max: usize,
        table: Vec<crate::design::MarginRow>,
    },

    #[error("sensor partition violates the decay condition (margin {margin})")]
    EnvelopeInvalid { margin: f64 },

    #[error("nonlinearity audit failed: {0}")]
    Lipschitz(String),

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
