use thiserror::Error;

/// Errors raised by the bound, simulation and PSF routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("quadrature did not reach tolerance: {what} (error estimate {estimate:e}, tolerance {tolerance:e})")]
    Quadrature {
        what: &'static str,
        estimate: f64,
        tolerance: f64,
    },

    #[error("PSF violates {symmetry} symmetry (max deviation {deviation:e})")]
    Symmetry {
        symmetry: &'static str,
        deviation: f64,
    },

    #[error("sampled PSF norm {norm} deviates from 1 by more than {tolerance:e}")]
    Normalization { norm: f64, tolerance: f64 },

    #[error("QFI is only defined for equal source strengths (eps1 = {eps1}, eps2 = {eps2})")]
    UnequalStrengths { eps1: f64, eps2: f64 },

    #[error("matrix block is singular (smallest eigenvalue {min_eigenvalue:e} below {threshold:e})")]
    Singular {
        min_eigenvalue: f64,
        threshold: f64,
    },

    #[error("oracle basis is ill-conditioned (Gram condition number ~{condition:e})")]
    IllConditionedBasis { condition: f64 },

    #[error("no conditional probability mass on the detection outcomes")]
    ZeroConditionalMass,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("PSF file line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
