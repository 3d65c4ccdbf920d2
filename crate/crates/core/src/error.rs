use thiserror::Error;

/// Errors produced by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    /// A value lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error: {0}")]
    Shape(String),

    /// Non-finite or otherwise unusable input data.
    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    /// The constrained stage could not produce a positive-definite estimate.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// Every candidate in a penalty grid failed.
    #[error("selection error: all {} candidates failed; first failure: {}", .failures.len(), .failures.first().map(|(l, m)| format!("lambda={l}: {m}")).unwrap_or_default())]
    Selection { failures: Vec<(f64, String)> },

    /// Shock propagation requires a spectral radius below one.
    #[error("shock series diverges: spectral radius {radius} >= 1")]
    Divergence { radius: f64 },

    #[error("numeric error: {0}")]
    Numeric(String),

    /// Time-series model fitting failed.
    #[error("fit error: {0}")]
    Fit(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input or configuration rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Shape(_)
                | Error::Data(_)
                | Error::Config(_)
                | Error::Domain(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
