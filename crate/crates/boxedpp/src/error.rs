//! Error type shared by all modules.

use std::fmt;

#[derive(Debug, Clone)]
pub enum Error {
    /// Parameters violate a positivity or admissibility constraint.
    InadmissibleParameters(String),
    /// Parameters sit on a lattice degeneracy (zero weight, pole, vanishing
    /// Pochhammer denominator).
    DegenerateParameters(String),
    /// Argument outside the mathematical domain of a function.
    Domain(String),
    /// Enumeration would exceed the configured cap.
    TooLarge(String),
    /// Input data violates a structural invariant (interlacing, bounds).
    Structural(String),
    /// Asymptotic formula evaluated outside its region of validity.
    BoundaryOfValidity(String),
    /// Frozen-boundary tracer could not close the curve; carries the partial
    /// polyline for diagnostics.
    TracerFailed {
        message: String,
        partial: Vec<(f64, f64)>,
    },
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InadmissibleParameters(m) => write!(f, "inadmissible parameters: {m}"),
            Error::DegenerateParameters(m) => write!(f, "degenerate parameters: {m}"),
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::TooLarge(m) => write!(f, "too large: {m}"),
            Error::Structural(m) => write!(f, "structural error: {m}"),
            Error::BoundaryOfValidity(m) => write!(f, "boundary of validity: {m}"),
            Error::TracerFailed { message, partial } => {
                write!(f, "tracer failed: {message} ({} partial points)", partial.len())
            }
            Error::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
