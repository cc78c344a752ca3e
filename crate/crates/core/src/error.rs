use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("kernel evaluated on the diagonal x = y")]
    CoincidentPoints,

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("point lies outside the domain: {0}")]
    OutOfDomain(String),

    #[error("point is not strictly on the positive side of the reflection hyperplane")]
    WrongSide,

    #[error("domain is not symmetric under the reflection frame")]
    AsymmetricDomain,

    #[error("stability index {0} outside (0, 1) for a one-sided stable law")]
    InvalidIndex(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no closed-form quadrature for {0}")]
    UnsupportedQuadrature(String),

    #[error("finite difference dominated by Monte Carlo noise (|diff| = {diff:.3e}, stderr = {stderr:.3e})")]
    NoiseDominated { diff: f64, stderr: f64 },

    #[error("function is only known on a bounded grid and no far-field model was declared")]
    TailModelMissing,

    #[error("eigensolver did not converge")]
    ConvergenceFailure,

    #[error("cone K(r, x) is empty for |x| = {0} (need |x| < r/4)")]
    EmptyCone(f64),

    #[error("I/O failure: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
