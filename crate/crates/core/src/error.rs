use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("could not place particle {particle} after {attempts} attempts")]
    Placement { particle: usize, attempts: usize },

    #[error("particles {i} and {j} coincide, coupling is singular")]
    SingularCoupling { i: usize, j: usize },

    #[error("particle index {index} out of range for {n} particles")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("subset must not be empty")]
    EmptySubset,

    #[error("eigenvalue radicand {0} lies outside [0, 1]")]
    Radicand(f64),

    #[error("trajectory needs {cells} cells, cap is {cap}")]
    TrajectoryTooLarge { cells: usize, cap: usize },

    #[error("oracle is capped at {cap} particles, system has {n}")]
    OracleCap { n: usize, cap: usize },

    #[error("density matrix has negative eigenvalue {0:e}")]
    NegativeEigenvalue(f64),

    #[error("global state is not pure, norm deviates by {0:e}")]
    PurityViolation(f64),

    #[error("window [{t1}, {t2}] outside trajectory span [{start}, {end}]")]
    WindowOutsideTrajectory { t1: f64, t2: f64, start: f64, end: f64 },

    #[error("degenerate fit window: {0}")]
    DegenerateWindow(String),

    #[error("{failed} of {total} ensemble runs failed to converge")]
    EnsembleFailure { failed: usize, total: usize },

    #[error("insufficient grid: {0}")]
    InsufficientGrid(String),

    #[error("fit did not converge: {0}")]
    NonConvergence(String),

    #[error("degenerate frequencies: {0}")]
    DegenerateFrequency(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status for the CLI: 1 usage/IO, 2 validation, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 1,
            Error::Parse { .. } | Error::Validation(_) | Error::Domain(_) => 2,
            _ => 3,
        }
    }
}
