//! One-step-ahead price forecasts from summary-graph parents.
//!
//! Each stock gets a lagged linear model on its parents' raw prices
//! (lags 1..=tau, intercept included, lag-0 regressors excluded). Stocks
//! without parents fall back to their own lags; singular fits fall back to
//! ridge and finally to carrying the last price forward.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::SummaryGraph;
use crate::linalg;
use crate::market_data::PricePanel;

/// Fixed regularizer for the ridge fallback on collinear designs.
pub const RIDGE_LAMBDA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitKind {
    Ols,
    Ridge,
    /// Model could not be fit; predictions carry the last price forward and
    /// are excluded from trading.
    CarryForward,
}

/// Lagged linear model for one target series.
#[derive(Debug, Clone)]
pub struct ParentModel {
    pub target: usize,
    /// Regressor series, ascending index order; `[target]` for the self-lag
    /// fallback. Empty for carry-forward models.
    pub parents: Vec<usize>,
    pub tau: usize,
    pub intercept: f64,
    /// coeffs[p * tau + (lag - 1)] multiplies parents[p] at `lag` days back.
    pub coeffs: Vec<f64>,
    /// Day index of the last regression target used in the fit.
    pub fitted_through: usize,
    pub kind: FitKind,
}

fn fit_linear(
    panel: &PricePanel,
    target: usize,
    parents: &[usize],
    tau: usize,
    end: usize,
    ridge: Option<f64>,
) -> Result<ParentModel> {
    let rows_needed = parents.len() * tau + 2;
    if end + 1 < tau || end + 1 - tau < rows_needed {
        return Err(Error::PanelTooShort {
            needed: rows_needed + tau,
            actual: end + 1,
        });
    }
    let rows = end - tau + 1;
    let k = parents.len() * tau + 1;
    let mut design = Array2::<f64>::zeros((rows, k));
    let mut target_vec = Array2::<f64>::zeros((rows, 1));
    for r in 0..rows {
        let t = r + tau;
        design[[r, 0]] = 1.0;
        for (p, &parent) in parents.iter().enumerate() {
            for lag in 1..=tau {
                design[[r, 1 + p * tau + (lag - 1)]] = panel.price(t - lag, parent);
            }
        }
        target_vec[[r, 0]] = panel.price(t, target);
    }
    let beta = match ridge {
        None => linalg::ols(design.view(), target_vec.view(), "fit_parent_model")?,
        Some(lambda) => linalg::ols_ridge(design.view(), target_vec.view(), lambda, "fit_parent_model")?,
    };
    Ok(ParentModel {
        target,
        parents: parents.to_vec(),
        tau,
        intercept: beta[[0, 0]],
        coeffs: beta.column(0).iter().skip(1).copied().collect(),
        fitted_through: end,
        kind: if ridge.is_some() { FitKind::Ridge } else { FitKind::Ols },
    })
}

/// Expanding-window fit of `target` on its summary-graph parents using all
/// rows with regression targets up to and including day `end`.
///
/// A target with no parents in the graph automatically falls back to its
/// own lags. Collinear designs surface as `SingularDesign`; callers that
/// must not abort use [`fit_with_fallback`].
pub fn fit_parent_model(
    panel: &PricePanel,
    graph: &SummaryGraph,
    target: usize,
    tau: usize,
    end: usize,
) -> Result<ParentModel> {
    if target >= panel.n_series() {
        return Err(Error::UnknownTicker {
            ticker: format!("index {target}"),
        });
    }
    if end >= panel.n_days() {
        return Err(Error::EndOfData { day: end });
    }
    let parents = graph.parents(target);
    let parents: Vec<usize> = if parents.is_empty() {
        vec![target]
    } else {
        parents.to_vec()
    };
    fit_linear(panel, target, &parents, tau, end, None)
}

/// Fit with the full fallback chain: OLS, then ridge-stabilized least
/// squares, then carry-forward. Never fails.
pub fn fit_with_fallback(
    panel: &PricePanel,
    graph: &SummaryGraph,
    target: usize,
    tau: usize,
    end: usize,
) -> ParentModel {
    match fit_parent_model(panel, graph, target, tau, end) {
        Ok(m) => m,
        Err(Error::SingularDesign { .. }) => {
            let parents = graph.parents(target);
            let parents: Vec<usize> = if parents.is_empty() {
                vec![target]
            } else {
                parents.to_vec()
            };
            match fit_linear(panel, target, &parents, tau, end, Some(RIDGE_LAMBDA)) {
                Ok(m) => m,
                Err(_) => carry_forward(target, tau, end),
            }
        }
        Err(_) => carry_forward(target, tau, end),
    }
}

fn carry_forward(target: usize, tau: usize, end: usize) -> ParentModel {
    ParentModel {
        target,
        parents: Vec::new(),
        tau,
        intercept: 0.0,
        coeffs: Vec::new(),
        fitted_through: end,
        kind: FitKind::CarryForward,
    }
}

/// One-step-ahead price prediction standing at day `t`: uses parent prices
/// at days t, t-1, ..., t-tau+1 and nothing later.
pub fn predict_next(model: &ParentModel, panel: &PricePanel, t: usize) -> Result<f64> {
    if t >= panel.n_days() {
        return Err(Error::EndOfData { day: t });
    }
    if model.fitted_through > t {
        return Err(Error::Domain {
            msg: format!(
                "model fitted through day {} used at earlier day {t}",
                model.fitted_through
            ),
        });
    }
    if model.kind == FitKind::CarryForward {
        return Ok(panel.price(t, model.target));
    }
    if t + 1 < model.tau {
        return Err(Error::PanelTooShort {
            needed: model.tau,
            actual: t + 1,
        });
    }
    let mut rho = model.intercept;
    for (p, &parent) in model.parents.iter().enumerate() {
        for lag in 1..=model.tau {
            // lag is relative to the predicted day t+1
            let day = t + 1 - lag;
            rho += model.coeffs[p * model.tau + (lag - 1)] * panel.price(day, parent);
        }
    }
    Ok(rho)
}

/// Predicted simple returns from today's actual prices and predicted
/// next-day prices.
pub fn predicted_returns(today: &[f64], predicted: &[f64]) -> Result<Vec<f64>> {
    if today.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: today.len(),
            right: predicted.len(),
        });
    }
    today
        .iter()
        .zip(predicted)
        .map(|(&p, &rho)| {
            if !(p > 0.0) {
                return Err(Error::NonPositivePrice {
                    ticker: String::new(),
                    date: String::new(),
                    value: p,
                });
            }
            Ok((rho - p) / p)
        })
        .collect()
}

/// Predictions for every series standing at day `t`.
#[derive(Debug, Clone)]
pub struct PredictionSet {
    pub as_of: usize,
    pub prices: Vec<f64>,
    pub returns: Vec<f64>,
    /// True where the prediction came from a carry-forward fallback; these
    /// are excluded from trading.
    pub carried: Vec<bool>,
}

/// Evaluate every model at day `t` and assemble the prediction set.
pub fn predict_all(panel: &PricePanel, models: &[ParentModel], t: usize) -> Result<PredictionSet> {
    let mut prices = Vec::with_capacity(models.len());
    let mut carried = Vec::with_capacity(models.len());
    for m in models {
        prices.push(predict_next(m, panel, t)?);
        carried.push(m.kind == FitKind::CarryForward);
    }
    let today: Vec<f64> = (0..models.len()).map(|c| panel.price(t, c)).collect();
    let returns = predicted_returns(&today, &prices)?;
    Ok(PredictionSet {
        as_of: t,
        prices,
        returns,
        carried,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use chrono::NaiveDate;
    use ndarray::Array2;
    use std::collections::BTreeSet;

    fn panel_from(cols: Vec<Vec<f64>>) -> PricePanel {
        let t = cols[0].len();
        let n = cols.len();
        let mut prices = Array2::<f64>::zeros((t, n));
        for (c, col) in cols.iter().enumerate() {
            for (r, &v) in col.iter().enumerate() {
                prices[[r, c]] = v;
            }
        }
        let dates: Vec<NaiveDate> = (0..t as u64)
            .map(|d| NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(d))
            .collect();
        let tickers: Vec<String> = (0..n).map(|i| format!("T{i}")).collect();
        PricePanel::new(dates, tickers, prices).unwrap()
    }

    fn chain_graph() -> SummaryGraph {
        // T0 -> T1 at lag 1
        SummaryGraph::new(
            vec!["T0".into(), "T1".into()],
            [(0usize, 1usize, BTreeSet::from([1usize]))],
        )
        .unwrap()
    }

    #[test]
    fn exact_lag_relation_recovered() {
        // T1[t] = T0[t-1] exactly
        let t0: Vec<f64> = (0..20).map(|i| 100.0 + 3.0 * i as f64 + ((i * i) % 7) as f64).collect();
        let mut t1 = vec![100.0];
        t1.extend(t0[..19].iter().copied());
        let panel = panel_from(vec![t0.clone(), t1]);
        let m = fit_parent_model(&panel, &chain_graph(), 1, 1, 15).unwrap();
        assert_abs_diff_eq!(m.intercept, 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(m.coeffs[0], 1.0, epsilon = 1e-10);
        // P^Y_t = 42 -> prediction 42
        let rho = predict_next(&m, &panel, 17).unwrap();
        assert_abs_diff_eq!(rho, t0[17], epsilon = 1e-8);
    }

    #[test]
    fn parentless_target_uses_self_lags() {
        let graph = SummaryGraph::new(
            vec!["T0".into(), "T1".into()],
            [(0usize, 1usize, BTreeSet::from([1usize]))],
        )
        .unwrap();
        // T0 has no parents -> self-lag fallback
        let t0: Vec<f64> = (0..20).map(|i| 50.0 * 1.1_f64.powi(i as i32) + 10.0).collect();
        let t1: Vec<f64> = (0..20).map(|i| 80.0 + i as f64).collect();
        let panel = panel_from(vec![t0, t1]);
        let m = fit_parent_model(&panel, &graph, 0, 1, 15).unwrap();
        assert_eq!(m.parents, vec![0]);
        assert_eq!(m.kind, FitKind::Ols);
    }

    #[test]
    fn prediction_ignores_future_prices() {
        let t0: Vec<f64> = (0..20).map(|i| 100.0 + 2.0 * i as f64 + ((i * 5) % 3) as f64).collect();
        let mut t1 = vec![100.0];
        t1.extend(t0[..19].iter().copied());
        let panel = panel_from(vec![t0.clone(), t1.clone()]);
        let m = fit_parent_model(&panel, &chain_graph(), 1, 1, 12).unwrap();
        let before = predict_next(&m, &panel, 13).unwrap();

        // corrupt everything strictly after day 13
        let mut t0b = t0.clone();
        let mut t1b = t1.clone();
        for d in 14..20 {
            t0b[d] = 1.0 + d as f64 * 17.0;
            t1b[d] = 2.0 + d as f64 * 23.0;
        }
        let corrupted = panel_from(vec![t0b, t1b]);
        let m2 = fit_parent_model(&corrupted, &chain_graph(), 1, 1, 12).unwrap();
        let after = predict_next(&m2, &corrupted, 13).unwrap();
        assert_eq!(before.to_bits(), after.to_bits());
    }

    #[test]
    fn expanding_window_refits() {
        // noisy-ish deterministic series; two end dates, two coefficient sets
        let t0: Vec<f64> = (0..30)
            .map(|i| 100.0 + (i as f64) * 0.9 + ((i * 7) % 5) as f64 * 1.3)
            .collect();
        let t1: Vec<f64> = (0..30)
            .map(|i| 90.0 + (i as f64) * 1.1 + ((i * 11) % 3) as f64 * 2.1)
            .collect();
        let panel = panel_from(vec![t0, t1]);
        let m_short = fit_parent_model(&panel, &chain_graph(), 1, 1, 10).unwrap();
        let m_long = fit_parent_model(&panel, &chain_graph(), 1, 1, 25).unwrap();
        assert_ne!(m_short.coeffs[0].to_bits(), m_long.coeffs[0].to_bits());
        assert_eq!(m_long.fitted_through, 25);
    }

    #[test]
    fn zero_coefficients_predict_the_intercept() {
        let m = ParentModel {
            target: 0,
            parents: vec![0],
            tau: 1,
            intercept: 100.0,
            coeffs: vec![0.0],
            fitted_through: 5,
            kind: FitKind::Ols,
        };
        let t0: Vec<f64> = (0..10).map(|i| 700.0 + 13.0 * i as f64).collect();
        let panel = panel_from(vec![t0]);
        assert_eq!(predict_next(&m, &panel, 8).unwrap(), 100.0);
    }

    #[test]
    fn carry_forward_predicts_last_price() {
        let m = carry_forward(0, 1, 5);
        let t0: Vec<f64> = (0..10).map(|i| 10.0 + i as f64).collect();
        let panel = panel_from(vec![t0]);
        let rho = predict_next(&m, &panel, 7).unwrap();
        assert_eq!(rho, 17.0);
    }

    #[test]
    fn predicted_returns_formula() {
        let g = predicted_returns(&[100.0], &[101.0]).unwrap();
        assert_abs_diff_eq!(g[0], 0.01, epsilon = 1e-15);
        let g = predicted_returns(&[100.0], &[100.0]).unwrap();
        assert_eq!(g[0], 0.0);
        assert!(predicted_returns(&[0.0], &[1.0]).is_err());
    }

    #[test]
    fn singular_parent_design_is_reported() {
        // two identical parents make the design collinear
        let base: Vec<f64> = (0..25).map(|i| 100.0 + 1.7 * i as f64 + ((i * 3) % 4) as f64).collect();
        let dup = base.clone();
        let target: Vec<f64> = (0..25).map(|i| 50.0 + 0.9 * i as f64).collect();
        let panel = panel_from(vec![base, dup, target]);
        let graph = SummaryGraph::new(
            vec!["T0".into(), "T1".into(), "T2".into()],
            [
                (0usize, 2usize, BTreeSet::from([1usize])),
                (1usize, 2usize, BTreeSet::from([1usize])),
            ],
        )
        .unwrap();
        let err = fit_parent_model(&panel, &graph, 2, 1, 20).unwrap_err();
        assert!(matches!(err, Error::SingularDesign { .. }));
        // fallback chain rescues it with ridge
        let m = fit_with_fallback(&panel, &graph, 2, 1, 20);
        assert_eq!(m.kind, FitKind::Ridge);
    }
}
