//! Walk-forward backtest over the test period.
//!
//! On every test day (except the last) the per-stock models are refit on an
//! expanding window ending the day before, a one-step prediction is made,
//! the long-short portfolio is formed, and the realized return is recorded
//! under the settlement date. The same loop runs with the self-cause graph
//! as a control, and an optional external index series rides along as the
//! benchmark.

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forecast::{self, ParentModel};
use crate::graph::SummaryGraph;
use crate::market_data::PricePanel;
use crate::profiling::Timings;
use crate::strategy::{self, DailyTrade, StrategyConfig};

/// Trading days per year used by the annualization formula.
pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

/// Winner count given either as an absolute count or as a fraction of the
/// panel width (rounded to nearest, floor one).
#[derive(Debug, Clone, Copy, Serialize)]
pub enum EtaSpec {
    Count(usize),
    Fraction(f64),
}

impl EtaSpec {
    pub fn resolve(&self, n_series: usize) -> usize {
        match *self {
            EtaSpec::Count(c) => c,
            EtaSpec::Fraction(f) => ((f * n_series as f64).round() as usize).max(1),
        }
    }
}

/// Full configuration echo; sufficient to reproduce a run bit-exactly.
#[derive(Debug, Clone, Serialize)]
pub struct BacktestConfig {
    pub tau: usize,
    pub eta: EtaSpec,
    pub cost: f64,
    pub threshold: f64,
    pub train_frac: f64,
    pub seed: u64,
    pub refit_every: usize,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            tau: 1,
            eta: EtaSpec::Count(1),
            cost: 0.001,
            threshold: 0.05,
            train_frac: 0.8,
            seed: 0,
            refit_every: 1,
        }
    }
}

/// Compounded return series with its summary figures.
#[derive(Debug, Clone, Serialize)]
pub struct ReturnSeries {
    pub daily: Vec<f64>,
    /// Running compounded return after each day.
    pub cumulative_curve: Vec<f64>,
    pub cumulative: f64,
    /// None when the series went bankrupt (cumulative return of -1).
    pub annualized: Option<f64>,
    pub bankrupt_at: Option<usize>,
}

impl ReturnSeries {
    fn from_daily(daily: Vec<f64>, t_test: usize) -> Self {
        let (curve, bankrupt_at) = cumulative_curve(&daily);
        let cumulative = curve.last().copied().unwrap_or(0.0);
        let annualized = annualize(cumulative, t_test).ok();
        Self {
            daily,
            cumulative_curve: curve,
            cumulative,
            annualized,
            bankrupt_at,
        }
    }
}

/// Benchmark returns aligned to the strategy's settlement dates; None where
/// the benchmark series is missing one of the two dates involved.
#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkSeries {
    pub daily: Vec<Option<f64>>,
    pub aligned_days: usize,
    pub missing_days: usize,
    pub cumulative: f64,
    pub annualized: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BacktestReport {
    pub config: BacktestConfig,
    pub eta_resolved: usize,
    pub split_index: usize,
    /// Number of test days T_test (the return series has T_test - 1 entries).
    pub t_test: usize,
    /// Settlement dates for each recorded daily return.
    pub dates: Vec<NaiveDate>,
    pub strategy: ReturnSeries,
    pub control: ReturnSeries,
    pub benchmark: Option<BenchmarkSeries>,
    pub trades: Vec<DailyTrade>,
    /// Days with too few eligible predictions to trade (recorded as zero).
    pub skipped_days: usize,
    pub timing: Timings,
}

/// Compounded return over the whole series, erroring at the first daily
/// return of -100% or worse.
pub fn cumulative(returns: &[f64]) -> Result<f64> {
    let mut acc = 1.0;
    for (i, &r) in returns.iter().enumerate() {
        if r <= -1.0 {
            return Err(Error::Bankrupt { day: i });
        }
        acc *= 1.0 + r;
    }
    Ok(acc - 1.0)
}

/// Running compounded curve; on bankruptcy the curve is pinned at -1 from
/// that day on and the day index is reported.
pub fn cumulative_curve(returns: &[f64]) -> (Vec<f64>, Option<usize>) {
    let mut curve = Vec::with_capacity(returns.len());
    let mut acc = 1.0;
    let mut bankrupt_at = None;
    for (i, &r) in returns.iter().enumerate() {
        if bankrupt_at.is_none() {
            acc *= 1.0 + r;
            if r <= -1.0 {
                bankrupt_at = Some(i);
                acc = 0.0;
            }
        }
        curve.push(acc - 1.0);
    }
    (curve, bankrupt_at)
}

/// Annualized return: (1 + r_cum)^(252 / T_test) - 1.
pub fn annualize(r_cum: f64, t_test: usize) -> Result<f64> {
    if t_test == 0 {
        return Err(Error::Domain {
            msg: "T_test must be >= 1".to_string(),
        });
    }
    if r_cum <= -1.0 {
        return Err(Error::Domain {
            msg: format!("cumulative return {r_cum} out of domain"),
        });
    }
    Ok((1.0 + r_cum).powf(TRADING_DAYS_PER_YEAR / t_test as f64) - 1.0)
}

struct WalkOutcome {
    daily: Vec<f64>,
    trades: Vec<DailyTrade>,
    skipped: usize,
}

/// One walk-forward pass over the test period with the given graph.
fn walk(
    panel: &PricePanel,
    split_index: usize,
    graph: &SummaryGraph,
    tau: usize,
    eta: usize,
    cost: f64,
    refit_every: usize,
    keep_trades: bool,
) -> Result<WalkOutcome> {
    let t_len = panel.n_days();
    let n = panel.n_series();
    let tickers = panel.tickers();
    let mut models: Vec<ParentModel> = Vec::new();
    let mut daily = Vec::with_capacity(t_len - split_index - 1);
    let mut trades = Vec::new();
    let mut skipped = 0usize;

    for d in split_index..t_len - 1 {
        if (d - split_index) % refit_every == 0 || models.is_empty() {
            // expanding window: all regression targets up to yesterday
            models = (0..n)
                .into_par_iter()
                .map(|i| forecast::fit_with_fallback(panel, graph, i, tau, d - 1))
                .collect();
        }
        let preds = forecast::predict_all(panel, &models, d)?;
        let eligible: Vec<bool> = preds.carried.iter().map(|&c| !c).collect();
        let picked = strategy::select(tickers, &preds.returns, &eligible, eta);
        let (winners, losers) = match picked {
            Ok(pair) => pair,
            Err(Error::TooFewTickers { .. }) => {
                // cannot form the portfolio today: flat, no cost incurred
                skipped += 1;
                daily.push(0.0);
                continue;
            }
            Err(e) => return Err(e),
        };
        assert_eq!(winners.len(), eta, "long leg must hold eta names");
        assert_eq!(losers.len(), eta, "short leg must hold eta names");
        assert!(
            winners.iter().all(|w| !losers.contains(w)),
            "legs must be disjoint"
        );
        let (long, short) = strategy::mark_to_market(panel, &winners, &losers, d)?;
        let r = strategy::realized_return(&long, &short, cost)?;
        daily.push(r);
        if keep_trades {
            trades.push(DailyTrade {
                date: panel.dates()[d],
                winners: winners.iter().map(|&i| tickers[i].clone()).collect(),
                losers: losers.iter().map(|&i| tickers[i].clone()).collect(),
                predicted: preds.returns.clone(),
                predicted_prices: preds.prices.clone(),
                realized_return: r,
            });
        }
    }
    Ok(WalkOutcome {
        daily,
        trades,
        skipped,
    })
}

fn benchmark_series(
    panel: &PricePanel,
    split_index: usize,
    bench: &PricePanel,
    t_test: usize,
) -> BenchmarkSeries {
    let t_len = panel.n_days();
    let mut daily = Vec::with_capacity(t_len - split_index - 1);
    let mut missing = 0usize;
    let col = 0usize; // first series of the benchmark file
    for d in split_index..t_len - 1 {
        let open_date = panel.dates()[d];
        let close_date = panel.dates()[d + 1];
        let open = bench
            .dates()
            .iter()
            .position(|&x| x == open_date)
            .map(|r| bench.price(r, col));
        let close = bench
            .dates()
            .iter()
            .position(|&x| x == close_date)
            .map(|r| bench.price(r, col));
        match (open, close) {
            (Some(p0), Some(p1)) if !p0.is_nan() && !p1.is_nan() => {
                daily.push(Some((p1 - p0) / p0));
            }
            _ => {
                missing += 1;
                daily.push(None);
            }
        }
    }
    let available: Vec<f64> = daily.iter().flatten().copied().collect();
    let (curve, _) = cumulative_curve(&available);
    let cumulative = curve.last().copied().unwrap_or(0.0);
    BenchmarkSeries {
        aligned_days: available.len(),
        missing_days: missing,
        cumulative,
        annualized: annualize(cumulative, t_test).ok(),
        daily,
    }
}

/// Run the full walk-forward backtest.
///
/// `panel` is the complete imputed panel; rows `0..split_index` are the
/// training prefix. The strategy trades on `graph`; the control loop always
/// uses the self-cause graph over the same tickers.
pub fn run(
    panel: &PricePanel,
    split_index: usize,
    graph: &SummaryGraph,
    cfg: &BacktestConfig,
    benchmark: Option<&PricePanel>,
) -> Result<BacktestReport> {
    if !panel.is_complete() {
        return Err(Error::NonFiniteInput {
            context: "backtest requires an imputed panel".to_string(),
        });
    }
    let t_len = panel.n_days();
    if split_index < cfg.tau + 2 || split_index + 2 > t_len {
        return Err(Error::PanelTooShort {
            needed: cfg.tau + 4,
            actual: t_len,
        });
    }
    if graph.tickers() != panel.tickers() {
        return Err(Error::TickerMismatch {
            msg: "graph tickers differ from panel tickers".to_string(),
        });
    }
    if cfg.refit_every == 0 {
        return Err(Error::InvalidConfig {
            msg: "refit_every must be >= 1".to_string(),
        });
    }
    let n = panel.n_series();
    let eta = cfg.eta.resolve(n);
    StrategyConfig::new(eta, cfg.cost).validate(n)?;

    let t_test = t_len - split_index;
    let mut timing = Timings::new();

    let strat_out = timing.time("strategy_walk", || {
        walk(
            panel,
            split_index,
            graph,
            cfg.tau,
            eta,
            cfg.cost,
            cfg.refit_every,
            true,
        )
    })?;
    let control_graph = SummaryGraph::self_cause(panel.tickers(), cfg.tau)?;
    let control_out = timing.time("control_walk", || {
        walk(
            panel,
            split_index,
            &control_graph,
            cfg.tau,
            eta,
            cfg.cost,
            cfg.refit_every,
            false,
        )
    })?;

    let bench = benchmark.map(|b| benchmark_series(panel, split_index, b, t_test));
    let dates: Vec<NaiveDate> = (split_index..t_len - 1)
        .map(|d| panel.dates()[d + 1])
        .collect();

    Ok(BacktestReport {
        config: cfg.clone(),
        eta_resolved: eta,
        split_index,
        t_test,
        dates,
        strategy: ReturnSeries::from_daily(strat_out.daily, t_test),
        control: ReturnSeries::from_daily(control_out.daily, t_test),
        benchmark: bench,
        trades: strat_out.trades,
        skipped_days: strat_out.skipped + control_out.skipped,
        timing,
    })
}

/// Side-by-side comparison row.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub name: String,
    pub cumulative: f64,
    pub annualized: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// strategy minus control, per settlement day.
    pub excess_vs_control: Vec<f64>,
    /// strategy minus benchmark where the benchmark is aligned.
    pub excess_vs_benchmark: Option<Vec<Option<f64>>>,
    pub benchmark_missing_days: usize,
}

/// Summarize a report against its control and benchmark references.
pub fn compare(report: &BacktestReport) -> Comparison {
    let mut rows = vec![
        ComparisonRow {
            name: "strategy".to_string(),
            cumulative: report.strategy.cumulative,
            annualized: report.strategy.annualized,
        },
        ComparisonRow {
            name: "self_cause_control".to_string(),
            cumulative: report.control.cumulative,
            annualized: report.control.annualized,
        },
    ];
    let mut excess_vs_benchmark = None;
    let mut missing = 0;
    if let Some(b) = &report.benchmark {
        rows.push(ComparisonRow {
            name: "benchmark".to_string(),
            cumulative: b.cumulative,
            annualized: b.annualized,
        });
        missing = b.missing_days;
        excess_vs_benchmark = Some(
            report
                .strategy
                .daily
                .iter()
                .zip(&b.daily)
                .map(|(s, b)| b.map(|bv| s - bv))
                .collect(),
        );
    }
    let excess_vs_control = report
        .strategy
        .daily
        .iter()
        .zip(&report.control.daily)
        .map(|(s, c)| s - c)
        .collect();
    Comparison {
        rows,
        excess_vs_control,
        excess_vs_benchmark,
        benchmark_missing_days: missing,
    }
}
