//! Crate-wide error type.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced anywhere in the toolkit.
#[derive(Debug)]
pub enum Error {
    /// CSV or config schema problem (missing/extra/duplicate columns, bad header).
    Schema(String),
    /// Invalid data content (non-finite value, non-positive close, duplicate row, missing price).
    Data(String),
    /// Zero volatility over a forward window; callers discard the stock for that window.
    DegenerateVolatility { ticker: String, anchor: usize },
    /// Anchor dates violate the non-overlap spacing requirement.
    Overlap(String),
    /// Labeling produced no rows.
    EmptyDataset(String),
    /// A chronological split produced an empty part.
    Split(String),
    /// AUC is undefined because only one class is present.
    UndefinedAuc,
    /// Training preconditions violated (e.g. single-class training set).
    Training(String),
    /// Training diverged (non-finite loss or gradient).
    Divergence(String),
    /// Input dimensionality does not match the model.
    Shape { expected: usize, found: usize },
    /// Network architecture constraint violated (e.g. too few input features).
    Architecture(String),
    /// Stacking protocol violation (empty or single-class part).
    Stacking(String),
    /// An API contract was violated by the caller (e.g. negative fitness).
    Contract(String),
    /// Portfolio sizing impossible (fewer scored tickers than `top_k`).
    Sizing(String),
    /// Requested date range not covered by the panel.
    Range(String),
    Io(std::io::Error),
    Csv(csv::Error),
    Json(serde_json::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Schema(msg) => write!(f, "schema error: {msg}"),
            Error::Data(msg) => write!(f, "data error: {msg}"),
            Error::DegenerateVolatility { ticker, anchor } => {
                write!(f, "degenerate volatility for {ticker} at anchor {anchor}")
            }
            Error::Overlap(msg) => write!(f, "anchor overlap: {msg}"),
            Error::EmptyDataset(msg) => write!(f, "empty dataset: {msg}"),
            Error::Split(msg) => write!(f, "split error: {msg}"),
            Error::UndefinedAuc => write!(f, "AUC undefined: only one class present"),
            Error::Training(msg) => write!(f, "training error: {msg}"),
            Error::Divergence(msg) => write!(f, "divergence: {msg}"),
            Error::Shape { expected, found } => {
                write!(f, "shape error: expected {expected} features, found {found}")
            }
            Error::Architecture(msg) => write!(f, "architecture error: {msg}"),
            Error::Stacking(msg) => write!(f, "stacking error: {msg}"),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::Sizing(msg) => write!(f, "sizing error: {msg}"),
            Error::Range(msg) => write!(f, "range error: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Csv(e) => write!(f, "csv error: {e}"),
            Error::Json(e) => write!(f, "json error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            Error::Csv(e) => Some(e),
            Error::Json(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}
