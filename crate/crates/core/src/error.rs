use thiserror::Error;

/// Errors raised across the toolkit.
///
/// The CLI maps each variant onto its exit-code contract through
/// [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("ill-conditioned system for L = {l}: cond(P_L) = {cond:.3e} exceeds {threshold:.1e}")]
    IllConditioned { l: usize, cond: f64, threshold: f64 },

    #[error("rank-deficient system: {0}")]
    RankDeficient(String),

    #[error("vanishing Clebsch-Gordan coefficient C^{{{l},0}}_{{K q, K -q}} for K = {k}, q = {q}; choose another q for this L")]
    VanishingCoefficient { k: String, q: String, l: usize },

    #[error("solver did not converge after {restarts} restarts (best residual {residual:.3e})")]
    NoConvergence { restarts: usize, residual: f64 },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 1 for I/O or parse problems, 2 for numerical
    /// conditioning, 3 for verification failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::IllConditioned { .. }
            | Error::RankDeficient(_)
            | Error::VanishingCoefficient { .. }
            | Error::NoConvergence { .. } => 2,
            Error::Verification(_) => 3,
            Error::Domain(_) | Error::InvalidInput(_) | Error::Io(_) | Error::Parse(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
