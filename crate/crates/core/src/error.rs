use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("gamma function pole at argument {0}")]
    Pole(f64),

    #[error("pole of gamma factor #{index} (slope {slope}, offset {offset}) at s = {s}")]
    FactorPole {
        index: usize,
        slope: f64,
        offset: f64,
        s: String,
    },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("series did not converge within {terms} terms: {what}")]
    NonConvergence { what: &'static str, terms: usize },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("contour integrand does not decay: {0}")]
    ContourDecay(String),

    #[error("imaginary residue {residue:e} exceeds tolerance")]
    ImaginaryResidue { residue: f64 },

    #[error("coincident poles near s = {0}; use the contour path")]
    CoincidentPoles(f64),

    #[error("finite-difference derivative unstable: levels disagree by {0:e}")]
    FiniteDifference(f64),

    #[error("size guard: {0}")]
    SizeGuard(String),

    #[error("residuals below the noise floor: {0}")]
    NoiseFloor(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
