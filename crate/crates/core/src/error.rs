use thiserror::Error;

/// Errors raised by the library. The CLI maps each variant to an exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian: max |A - A^H| = {deviation:.3e} (allowed {allowed:.3e})")]
    NotHermitian { deviation: f64, allowed: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("eigensolver did not converge")]
    EigenFailure,
    #[error("matrix exponential overflow (1-norm {norm:.3e})")]
    ExpOverflow { norm: f64 },
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("J below J0: J = {j}, J0 = {j0:.4}")]
    JBelowJ0 { j: u32, j0: f64 },
    #[error("envelope not integrable: {0}")]
    NotIntegrable(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("no states in shell (center {center}, width {width})")]
    EmptyWindow { center: f64, width: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("{0}")]
    Numerical(String),
    #[error("at E = {energy}: {source}")]
    AtGridPoint { energy: f64, source: Box<Error> },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Strips grid-point annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtGridPoint { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn is_convergence_failure(&self) -> bool {
        matches!(self.root(), Error::NoConvergence { .. } | Error::EigenFailure | Error::Numerical(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
