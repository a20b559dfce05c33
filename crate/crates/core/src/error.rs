use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("energy {mu} lies within the threshold window of channel {channel} (mu/omega = {ratio})")]
    Threshold { mu: f64, ratio: f64, channel: i64 },
    #[error("coincident points: kernel is singular at zero separation")]
    CoincidentPoints,
    #[error("series tail not converged: achieved bound {bound:e} above tolerance {tol:e}")]
    TailNotConverged { bound: f64, tol: f64 },
    #[error("quadrature not converged: two orders differ by {diff:e} (tolerance {tol:e})")]
    Quadrature { diff: f64, tol: f64 },
    #[error("extrapolation not converged for basis element {element}: estimate spread {spread:e} (tolerance {tol:e})")]
    Extrapolation { element: usize, spread: f64, tol: f64 },
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("near-singular system at mu = {mu}: smallest singular value {smin:e}, condition {cond:e}")]
    Singular { mu: f64, smin: f64, cond: f64 },
    #[error("channel closed: energy {energy} below threshold {threshold}")]
    ClosedChannel { energy: f64, threshold: f64 },
    #[error("channels off shell: energies {0} and {1}")]
    OffShell(f64, f64),
    #[error("Hermite degree {0} overflows double precision at this argument")]
    HermiteOverflow(usize),
    #[error("zero input")]
    ZeroInput,
    #[error("i/o error: {0}")]
    Io(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cache entry rejected: {0}")]
    Cache(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
