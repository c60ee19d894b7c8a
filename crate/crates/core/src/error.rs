use thiserror::Error;

/// Errors produced by the work-distribution toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("operator is not Hermitian (max |A - A^dagger| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("operator is not unitary (max |U^dagger U - 1| = {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("eigen-solver failed to converge (residual norm {residual:.3e})")]
    NumericalFailure { residual: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error{}: {message}", location(.key, .line))]
    Config {
        key: Option<String>,
        line: Option<usize>,
        message: String,
    },

    #[error("enumeration needs {required} trajectories but the cap is {cap}")]
    Resource { required: u128, cap: u64 },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn location(key: &Option<String>, line: &Option<usize>) -> String {
    match (key, line) {
        (Some(k), Some(l)) => format!(" at key `{k}` (line {l})"),
        (Some(k), None) => format!(" at key `{k}`"),
        (None, Some(l)) => format!(" (line {l})"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub fn config(key: impl Into<String>, line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Config {
            key: Some(key.into()),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
