//! Crate-wide error type.
//!
//! Errors are grouped into coarse kinds so the CLI can map them onto
//! exit codes (data problems exit 2, numeric failures exit 3).

use thiserror::Error;

/// Coarse error category, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input data, missing files, malformed CSV, invalid configuration.
    Data,
    /// Numerical failure: singular designs, non-stationary draws, domain errors.
    Numeric,
    /// I/O failure unrelated to data content.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV at {path}:{line}: {msg}")]
    MalformedCsv { path: String, line: u64, msg: String },

    #[error("duplicate date {date}")]
    DuplicateDate { date: String },

    #[error("non-positive price {value} for {ticker} on {date}")]
    NonPositivePrice {
        ticker: String,
        date: String,
        value: f64,
    },

    #[error("panel has no series left")]
    EmptyPanel,

    #[error("panel too short: need at least {needed} rows, have {actual}")]
    PanelTooShort { needed: usize, actual: usize },

    #[error("unknown ticker {ticker}")]
    UnknownTicker { ticker: String },

    #[error("ticker sets do not match: {msg}")]
    TickerMismatch { msg: String },

    #[error("singular design matrix ({context})")]
    SingularDesign { context: String },

    #[error("non-finite input ({context})")]
    NonFiniteInput { context: String },

    #[error("too few samples: need {needed}, have {actual}")]
    TooFewSamples { needed: usize, actual: usize },

    #[error("too few tickers: need {needed}, have {actual}")]
    TooFewTickers { needed: usize, actual: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("missing price for {ticker} on day index {day}")]
    MissingPrice { ticker: String, day: usize },

    #[error("no next-day price after day index {day}")]
    EndOfData { day: usize },

    #[error("portfolio bankrupt on day index {day} (daily return <= -1)")]
    Bankrupt { day: usize },

    #[error("domain error: {msg}")]
    Domain { msg: String },

    #[error("could not draw a stationary, identifiable process after {attempts} attempts")]
    Unstationary { attempts: usize },

    #[error("time budget exceeded during {phase}")]
    Timeout { phase: String },

    #[error("memory cap exceeded: estimated {estimated_mb:.0} MB, cap {cap_mb:.0} MB")]
    MemoryLimit { estimated_mb: f64, cap_mb: f64 },

    #[error("fetch failed for {ticker}: {msg}")]
    Fetch { ticker: String, msg: String },

    #[error("invalid configuration: {msg}")]
    InvalidConfig { msg: String },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            Io { .. } => ErrorKind::Io,
            MalformedCsv { .. }
            | DuplicateDate { .. }
            | NonPositivePrice { .. }
            | EmptyPanel
            | PanelTooShort { .. }
            | UnknownTicker { .. }
            | TickerMismatch { .. }
            | MissingPrice { .. }
            | EndOfData { .. }
            | TooFewTickers { .. }
            | LengthMismatch { .. }
            | Fetch { .. }
            | InvalidConfig { .. } => ErrorKind::Data,
            SingularDesign { .. }
            | NonFiniteInput { .. }
            | TooFewSamples { .. }
            | Bankrupt { .. }
            | Domain { .. }
            | Unstationary { .. }
            | Timeout { .. }
            | MemoryLimit { .. } => ErrorKind::Numeric,
        }
    }

    /// Exit code the CLI should use for this error.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Data | ErrorKind::Io => 2,
            ErrorKind::Numeric => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
