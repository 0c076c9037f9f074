/// Error type shared by graph construction, solvers, and search routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("solver stalled: relative residual {residual:.3e} after {iterations} iterations")]
    SolverStalled { residual: f64, iterations: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("cap exceeded: {0}")]
    CapExceeded(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code contract used by the CLI: 2 validation, 3 solver, 4 caps.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Validation(_) => 2,
            Error::SolverStalled { .. } | Error::Singular(_) => 3,
            Error::CapExceeded(_) => 4,
            Error::Io(_) => 1,
        }
    }
}
