use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} is outside its domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("sample is empty")]
    EmptySample,

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("total weight is zero; the weighted quantile is undefined")]
    DegenerateWeights,

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("cannot fit censoring model: {0}")]
    CannotFit(String),

    #[error(
        "Newton iterations did not converge after {iterations} steps \
         (gradient norm {grad_norm:.3e}, last iterate {iterate:?})"
    )]
    Convergence {
        iterations: usize,
        grad_norm: f64,
        iterate: Vec<f64>,
    },

    #[error("pair-copula fit failed for family {family}: log-likelihood is -inf everywhere")]
    PairFit { family: String },

    #[error("no candidate family could be fitted")]
    Selection,

    #[error("fitting vine edge {edge} at tree level {level} failed: {source}")]
    EdgeFit {
        level: usize,
        edge: String,
        #[source]
        source: Box<Error>,
    },

    #[error("only {events} uncensored rows; at least {required} are needed")]
    TooFewEvents { events: usize, required: usize },

    #[error("all prediction weights are zero at x = {x:?}")]
    DegeneratePrediction { x: Vec<f64> },

    #[error("leave-one-out fold {fold} failed: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{0} is not supported for this data-generating process")]
    Unsupported(String),

    #[error("malformed artifact: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
