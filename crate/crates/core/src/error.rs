use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("matrix is not positive definite (pivot {pivot:e} at column {column})")]
    NotPd { column: usize, pivot: f64 },
    #[error("invalid degrees of freedom ({d1}, {d2})")]
    InvalidDoF { d1: u64, d2: u64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: duplicate date {date}")]
    DuplicateDate { path: String, date: u32 },
    #[error("{path}: panel has no usable rows")]
    EmptyPanel { path: String },
    #[error("panels share no common dates")]
    NoOverlap,
    #[error("risk-free column `{0}` not found in factor panel")]
    MissingRiskfree(String),
    #[error("duplicate model name `{0}`")]
    DuplicateModelName(String),
    #[error("invalid model `{name}`: {reason}")]
    BadModel { name: String, reason: String },
    #[error("model `{model}` references unknown factor `{factor}`")]
    UnknownFactor { model: String, factor: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("design matrix for model `{0}` is rank deficient (collinear factors)")]
    RankDeficient(String),
    #[error("insufficient sample: T = {t} but at least {required} observations are needed")]
    InsufficientSample { t: usize, required: usize },
    #[error("factor covariance matrix is singular")]
    SingularFactorCov,
    #[error("GRS degrees of freedom T - n - k = {0} is below 1")]
    DegenerateDoF(i64),
    #[error("residual covariance matrix is singular")]
    SingularResidualCov,

    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("posterior scale matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NonPdPosterior(f64),
    #[error("invalid dimension {0}")]
    InvalidDimension(usize),

    #[error("source covariance is singular; transport map undefined")]
    SingularSource,

    #[error("inconsistent report inputs: {0}")]
    InconsistentInputs(String),
    #[error("reports come from different cross sections")]
    MixedCrossSections,
    #[error("no reports to rank")]
    EmptyReports,

    #[error("target AD {target} is not bracketed by [{ad_hi}, {ad_lo}] over the sigma range")]
    NotBracketed { target: f64, ad_lo: f64, ad_hi: f64 },
    #[error("bisection did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("bad synthetic configuration: {0}")]
    BadConfig(String),
}

impl Error {
    /// True for failures of the numerical machinery rather than bad user input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotSymmetric { .. }
                | Error::NotPsd { .. }
                | Error::NotPd { .. }
                | Error::SingularFactorCov
                | Error::SingularResidualCov
                | Error::NonPdPosterior(_)
                | Error::SingularSource
                | Error::NoConvergence(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
