use thiserror::Error;

/// Errors raised by the numeric kernels and samplers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of a function, e.g. `|h| >= 1`
    /// for the Fisher transform.
    #[error("domain error in {op}: {value} is outside {domain}")]
    Domain {
        op: &'static str,
        value: f64,
        domain: &'static str,
    },

    /// A vector or column has zero variance.
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    /// Vector lengths or matrix dimensions disagree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Counts or sizes violate a precondition (u >= k, n < 4, ...).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A covariance or correlation matrix is not admissible.
    #[error("invalid covariance structure: {0}")]
    Validity(String),

    /// The dense analytic pipeline refuses problems above its size cap.
    #[error("size limit exceeded: k = {k} but at most {max} features are supported")]
    Size { k: usize, max: usize },

    /// A polynomial with zero leading coefficient was passed to the cubic solver.
    #[error("leading coefficient is zero; not a cubic")]
    Degree,

    /// Failure while processing a specific feature column.
    #[error("feature column {column}: {source}")]
    Column {
        column: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
