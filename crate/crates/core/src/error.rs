use thiserror::Error;

/// Everything that can go wrong while building or solving a chain model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max |h - h^dag| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("site index {index} out of range for {n_sites} sites")]
    IndexOutOfRange { index: usize, n_sites: usize },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("invalid chain specification: {0}")]
    InvalidSpec(String),

    #[error("transition frequency too small: {context} (omega = {omega:e})")]
    FrequencyTooSmall { omega: f64, context: String },

    #[error("Bohr frequencies {a} and {b} are closer than the secular binning can resolve")]
    NearDegenerateGap { a: f64, b: f64 },

    #[error(
        "steady state is not unique: smallest eigenvalue magnitudes {smallest:e} and {second:e} \
         (floor {floor:e})"
    )]
    DegenerateSteadyState { smallest: f64, second: f64, floor: f64 },

    #[error("integrator could not meet tolerance at t = {t}")]
    ToleranceNotMet { t: f64 },

    #[error("positivity lost at t = {t}: min eigenvalue {min_eigenvalue:e}")]
    PositivityLost { t: f64, min_eigenvalue: f64 },

    #[error("trace drifted by {drift:e} at t = {t}")]
    TraceDrift { t: f64, drift: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("system too large for dense superoperator: dimension {dim} exceeds {limit}")]
    TooLarge { dim: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
