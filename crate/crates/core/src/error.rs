use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// The numeric point lies outside the convergence or genericity region.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("infinite product did not converge within {max_terms} terms (argument {arg})")]
    NonConvergent { arg: String, max_terms: usize },

    /// A factor that must stay in a denominator vanished.
    #[error("pole hit: {0}")]
    PoleHit(String),

    #[error("resonance: {0}")]
    Resonance(String),

    #[error("evaluation point within {tolerance:e} of the diagonal x_{i}/x_{j} in q^Z")]
    NearDiagonal { i: usize, j: usize, tolerance: f64 },

    #[error("pole coordinates collide: {0}")]
    NonSimplePole(String),

    #[error("matrix is numerically singular (condition number {condition:e})")]
    Singular { condition: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    /// Process exit code for this error: 2 for domain/input errors, 3 for
    /// resonances and singular matrices.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Invalid(_) | Error::NonConvergent { .. } => 2,
            Error::PoleHit(_)
            | Error::Resonance(_)
            | Error::NearDiagonal { .. }
            | Error::NonSimplePole(_)
            | Error::Singular { .. } => 3,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Invalid(e.to_string())
    }
}
