use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("support exceeds grid: {0}")]
    SupportExceedsGrid(String),

    #[error("shift {shift:?} is not aligned to grid spacing {spacing}")]
    MisalignedShift { shift: Vec<f64>, spacing: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("memory guard: {points} grid points exceeds limit {limit}")]
    MemoryGuard { points: usize, limit: usize },

    #[error("matrix is not Hermitian (anti-Hermitian residual {residual:e})")]
    NonHermitian { residual: f64 },

    #[error("atom {atom} has indefinite weight (min eigenvalue {eigenvalue:e})")]
    IndefiniteAtom { atom: usize, eigenvalue: f64 },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("unknown atom index {index} (measure has {count} atoms)")]
    UnknownAtom { index: usize, count: usize },

    #[error("underdetermined system: {equations} equations for {unknowns} unknowns")]
    Underdetermined { equations: usize, unknowns: usize },

    #[error("ill-conditioned probe family (condition number {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("oracle domain error: {0}")]
    OracleDomain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
