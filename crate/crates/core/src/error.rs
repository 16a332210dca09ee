use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("empty input")]
    EmptyInput,

    #[error("unbalanced panel: classifier {classifier:?} is missing observation {key}")]
    UnbalancedPanel { classifier: String, key: String },

    #[error("duplicate key {key} for classifier {classifier:?}")]
    DuplicateKey { classifier: String, key: String },

    #[error("classifier sets differ between tables: {0:?} vs {1:?}")]
    ClassifierMismatch(Vec<String>, Vec<String>),

    #[error("unknown classifier {0:?}")]
    UnknownClassifier(String),

    #[error("precision undefined for classifier {classifier:?} on class {class:?}: no predicted positives")]
    UndefinedPrecision { classifier: String, class: String },

    #[error("boundary precision {value} for {which}; logit is infinite (use the score test or the Haldane correction)")]
    BoundaryPrecision { which: String, value: f64 },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("IRLS did not converge after {0} iterations")]
    NotConverged(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for errors caused by the data rather than by the caller or the
    /// numerics; the CLI maps these to exit code 2.
    pub fn is_degenerate_data(&self) -> bool {
        matches!(
            self,
            Error::UndefinedPrecision { .. }
                | Error::BoundaryPrecision { .. }
                | Error::Degenerate(_)
                | Error::RankDeficient
                | Error::UnbalancedPanel { .. }
                | Error::EmptyInput
        )
    }

    /// True for numerical failures inside the library.
    pub fn is_numeric_failure(&self) -> bool {
        matches!(self, Error::NotConverged(_))
    }
}
