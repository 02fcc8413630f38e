//! Daily dollar-neutral long-short construction and realized returns.

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::market_data::PricePanel;

/// Deterministic tie-breaking rule for equal predicted returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum TieBreak {
    /// Equal predictions are ranked by ascending ticker symbol.
    #[default]
    Lexicographic,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyConfig {
    /// Number of winner (and loser) stocks, eta.
    pub eta: usize,
    /// Flat daily transaction cost subtracted from the portfolio return.
    pub cost: f64,
    pub tie_break: TieBreak,
}

impl StrategyConfig {
    pub fn new(eta: usize, cost: f64) -> Self {
        Self {
            eta,
            cost,
            tie_break: TieBreak::Lexicographic,
        }
    }

    pub fn validate(&self, n_series: usize) -> Result<()> {
        if self.eta == 0 {
            return Err(Error::InvalidConfig {
                msg: "eta must be >= 1".to_string(),
            });
        }
        if 2 * self.eta > n_series {
            return Err(Error::TooFewTickers {
                needed: 2 * self.eta,
                actual: n_series,
            });
        }
        if !(0.0..1.0).contains(&self.cost) {
            return Err(Error::InvalidConfig {
                msg: format!("cost must be in [0,1), got {}", self.cost),
            });
        }
        Ok(())
    }
}

/// One executed day: equal-weight long the winners, short the losers.
#[derive(Debug, Clone, Serialize)]
pub struct DailyTrade {
    /// Decision date (positions opened at its close, closed the next day).
    pub date: NaiveDate,
    pub winners: Vec<String>,
    pub losers: Vec<String>,
    /// Predicted next-day returns for all tickers, by panel order.
    pub predicted: Vec<f64>,
    /// Predicted next-day prices for all tickers, by panel order.
    pub predicted_prices: Vec<f64>,
    pub realized_return: f64,
}

/// Pick the eta tickers with the highest predicted returns as winners and,
/// from the remaining pool, the eta lowest as losers. `eligible[i] = false`
/// removes ticker i from consideration (carry-forward fallbacks).
///
/// Ties are broken by ascending ticker symbol; the two legs are disjoint by
/// construction.
pub fn select(
    tickers: &[String],
    gamma: &[f64],
    eligible: &[bool],
    eta: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if tickers.len() != gamma.len() || tickers.len() != eligible.len() {
        return Err(Error::LengthMismatch {
            left: tickers.len(),
            right: gamma.len().max(eligible.len()),
        });
    }
    if eta == 0 {
        return Err(Error::InvalidConfig {
            msg: "eta must be >= 1".to_string(),
        });
    }
    let mut pool: Vec<usize> = (0..tickers.len()).filter(|&i| eligible[i]).collect();
    if pool.len() < 2 * eta {
        return Err(Error::TooFewTickers {
            needed: 2 * eta,
            actual: pool.len(),
        });
    }
    for &i in &pool {
        if !gamma[i].is_finite() {
            return Err(Error::NonFiniteInput {
                context: format!("predicted return for {}", tickers[i]),
            });
        }
    }
    pool.sort_by(|&a, &b| {
        gamma[b]
            .total_cmp(&gamma[a])
            .then_with(|| tickers[a].cmp(&tickers[b]))
    });
    let winners: Vec<usize> = pool[..eta].to_vec();
    let mut rest: Vec<usize> = pool[eta..].to_vec();
    rest.sort_by(|&a, &b| {
        gamma[a]
            .total_cmp(&gamma[b])
            .then_with(|| tickers[a].cmp(&tickers[b]))
    });
    let losers: Vec<usize> = rest[..eta].to_vec();
    Ok((winners, losers))
}

/// Realized next-day simple returns for both legs: positions opened at the
/// close of day `t` and closed at the close of day `t+1`.
pub fn mark_to_market(
    panel: &PricePanel,
    winners: &[usize],
    losers: &[usize],
    t: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if t + 1 >= panel.n_days() {
        return Err(Error::EndOfData { day: t });
    }
    let leg = |idxs: &[usize]| -> Result<Vec<f64>> {
        idxs.iter()
            .map(|&i| {
                let p0 = panel.price(t, i);
                let p1 = panel.price(t + 1, i);
                if p0.is_nan() || p1.is_nan() {
                    return Err(Error::MissingPrice {
                        ticker: panel.tickers()[i].clone(),
                        day: t,
                    });
                }
                Ok((p1 - p0) / p0)
            })
            .collect()
    };
    Ok((leg(winners)?, leg(losers)?))
}

/// Portfolio daily return: equal-weight long leg minus equal-weight short
/// leg minus the flat transaction cost.
pub fn realized_return(long: &[f64], short: &[f64], cost: f64) -> Result<f64> {
    if long.len() != short.len() || long.is_empty() {
        return Err(Error::LengthMismatch {
            left: long.len(),
            right: short.len(),
        });
    }
    let eta = long.len() as f64;
    let l: f64 = long.iter().sum::<f64>() / eta;
    let s: f64 = short.iter().sum::<f64>() / eta;
    Ok(l - s - cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use chrono::NaiveDate;

    fn tickers(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn selects_top_and_bottom() {
        let t = tickers(&["A", "B", "C"]);
        let (w, l) = select(&t, &[0.02, 0.0, -0.01], &[true, true, true], 1).unwrap();
        assert_eq!(w, vec![0]);
        assert_eq!(l, vec![2]);
    }

    #[test]
    fn tie_break_is_lexicographic() {
        let t = tickers(&["A", "B", "C", "D"]);
        let (w, l) = select(&t, &[0.01, 0.01, -0.01, -0.01], &[true; 4], 1).unwrap();
        assert_eq!(w, vec![0]); // A
        assert_eq!(l, vec![2]); // C
    }

    #[test]
    fn too_few_tickers_rejected() {
        let t = tickers(&["A", "B", "C"]);
        let err = select(&t, &[0.1, 0.2, 0.3], &[true; 3], 2).unwrap_err();
        assert!(matches!(err, Error::TooFewTickers { .. }));
    }

    #[test]
    fn legs_stay_disjoint_under_full_tie() {
        let t = tickers(&["A", "B"]);
        let (w, l) = select(&t, &[0.0, 0.0], &[true, true], 1).unwrap();
        assert_eq!(w, vec![0]);
        assert_eq!(l, vec![1]);
    }

    #[test]
    fn ineligible_tickers_are_skipped() {
        let t = tickers(&["A", "B", "C", "D"]);
        let (w, l) = select(&t, &[0.5, 0.02, -0.01, 0.0], &[false, true, true, true], 1).unwrap();
        assert_eq!(w, vec![1]); // A excluded despite top gamma
        assert_eq!(l, vec![2]);
    }

    #[test]
    fn realized_return_formula() {
        assert_abs_diff_eq!(
            realized_return(&[0.02], &[0.01], 0.001).unwrap(),
            0.009,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            realized_return(&[0.0], &[0.0], 0.001).unwrap(),
            -0.001,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            realized_return(&[0.02, 0.04], &[0.01, -0.01], 0.0).unwrap(),
            0.03,
            epsilon = 1e-15
        );
    }

    #[test]
    fn realized_return_is_monotone_in_cost() {
        let r1 = realized_return(&[0.02], &[0.01], 0.0).unwrap();
        let r2 = realized_return(&[0.02], &[0.01], 0.002).unwrap();
        assert!(r2 < r1);
    }

    #[test]
    fn rank_invariance_under_monotone_transform() {
        let t = tickers(&["A", "B", "C", "D", "E"]);
        let gamma: [f64; 5] = [0.03, -0.02, 0.01, 0.0, -0.04];
        let transformed: Vec<f64> = gamma.iter().map(|g| (3.0 * g).exp() + 7.0).collect();
        let a = select(&t, &gamma, &[true; 5], 2).unwrap();
        let b = select(&t, &transformed, &[true; 5], 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mark_to_market_returns() {
        let dates: Vec<NaiveDate> = (0..3u64)
            .map(|d| NaiveDate::from_ymd_opt(2021, 1, 1).unwrap() + chrono::Days::new(d))
            .collect();
        let prices = ndarray::array![[100.0, 50.0], [102.0, 50.0], [101.0, 49.0]];
        let panel = PricePanel::new(dates, tickers(&["A", "B"]), prices).unwrap();
        let (long, short) = mark_to_market(&panel, &[0], &[1], 0).unwrap();
        assert_abs_diff_eq!(long[0], 0.02, epsilon = 1e-15);
        assert_eq!(short[0], 0.0);
        let err = mark_to_market(&panel, &[0], &[1], 2).unwrap_err();
        assert!(matches!(err, Error::EndOfData { .. }));
    }

    #[test]
    fn validate_checks_eta_bounds() {
        assert!(StrategyConfig::new(2, 0.001).validate(3).is_err());
        assert!(StrategyConfig::new(2, 0.001).validate(4).is_ok());
        assert!(StrategyConfig::new(1, 1.0).validate(4).is_err());
    }
}
