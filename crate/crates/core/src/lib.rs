//! Causeway: causal driving-force discovery and trading on daily price panels.
//!
//! The pipeline, end to end:
//!
//! 1. [`market_data`] loads a date-by-ticker CSV panel, fills interior gaps
//!    by linear interpolation (dropping series with leading/trailing gaps),
//!    and splits it into an earliest-80% training prefix and a test suffix.
//! 2. [`discovery`] fits a least-squares VAR to the standardized training
//!    series and orders the residuals with a deterministic LiNGAM procedure
//!    to obtain instantaneous and lagged coefficient matrices, which
//!    [`discovery::summary_graph`] compresses into a directed graph of
//!    driving forces over the tickers.
//! 3. [`forecast`] fits each stock on its graph parents' lagged prices over
//!    an expanding window and predicts the next day's price and return.
//! 4. [`strategy`] turns one day's predicted returns into an equal-weight,
//!    dollar-neutral long-short portfolio and computes its realized return
//!    net of a flat daily transaction cost.
//! 5. [`backtest`] walks these steps forward over the test period, records
//!    the daily series next to a self-cause control and an optional index
//!    benchmark, and reports cumulative and annualized figures.
//! 6. [`synthetic`] generates processes with known causal structure and
//!    scores recovered graphs, which is how the discovery stage is
//!    validated; [`profiling`] measures wall clock and memory along the way.

pub mod backtest;
pub mod discovery;
pub mod error;
pub mod fetch;
pub mod forecast;
pub mod graph;
pub mod io_util;
pub mod linalg;
pub mod market_data;
pub mod profiling;
pub mod strategy;
pub mod synthetic;

pub use backtest::{BacktestConfig, BacktestReport, EtaSpec};
pub use discovery::{direct_lingam, fit_var, self_cause_graph, summary_graph, varlingam};
pub use discovery::{DirectLingamOutcome, LingamOptions, VarLingamModel, VarModel};
pub use error::{Error, ErrorKind, Result};
pub use fetch::{fetch_remote, FetchConfig, FetchOutcome};
pub use graph::SummaryGraph;
pub use market_data::{impute, load_csv, split, write_csv, PricePanel, SplitPanel};
pub use strategy::{DailyTrade, StrategyConfig, TieBreak};
pub use synthetic::{generate, score, GeneratorConfig, GraphScore, GroundTruth, NoiseFamily};
