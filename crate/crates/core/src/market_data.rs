//! Daily price panels: CSV loading, gap imputation, and train/test splits.
//!
//! The on-disk format is a plain CSV with a `date` column followed by one
//! column per ticker. Empty cells mark missing prices; internally a missing
//! entry is a NaN until [`impute`] has run. Every operation that feeds the
//! modelling layers requires a complete panel.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::NaiveDate;
use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Date-indexed matrix of daily prices, one column per ticker.
///
/// Invariants: dates strictly increasing, tickers unique, and every present
/// (non-NaN) price finite and strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    prices: Array2<f64>,
}

impl PricePanel {
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, prices: Array2<f64>) -> Result<Self> {
        if tickers.is_empty() || dates.is_empty() {
            return Err(Error::EmptyPanel);
        }
        if prices.nrows() != dates.len() || prices.ncols() != tickers.len() {
            return Err(Error::LengthMismatch {
                left: prices.nrows() * prices.ncols(),
                right: dates.len() * tickers.len(),
            });
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::DuplicateDate {
                    date: w[1].to_string(),
                });
            }
        }
        let mut seen = BTreeSet::new();
        for t in &tickers {
            if !seen.insert(t.clone()) {
                return Err(Error::TickerMismatch {
                    msg: format!("duplicate ticker {t}"),
                });
            }
        }
        for ((r, c), &v) in prices.indexed_iter() {
            if v.is_nan() {
                continue; // missing, resolved by impute()
            }
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::NonPositivePrice {
                    ticker: tickers[c].clone(),
                    date: dates[r].to_string(),
                    value: v,
                });
            }
        }
        Ok(Self {
            dates,
            tickers,
            prices,
        })
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    pub fn n_series(&self) -> usize {
        self.tickers.len()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn prices(&self) -> &Array2<f64> {
        &self.prices
    }

    pub fn price(&self, day: usize, series: usize) -> f64 {
        self.prices[[day, series]]
    }

    pub fn series(&self, idx: usize) -> ArrayView1<'_, f64> {
        self.prices.column(idx)
    }

    pub fn ticker_index(&self, ticker: &str) -> Option<usize> {
        self.tickers.iter().position(|t| t == ticker)
    }

    /// True when no entry is missing.
    pub fn is_complete(&self) -> bool {
        self.prices.iter().all(|v| !v.is_nan())
    }

    /// Number of missing entries.
    pub fn missing_count(&self) -> usize {
        self.prices.iter().filter(|v| v.is_nan()).count()
    }
}

/// A panel split into a training prefix and test suffix.
#[derive(Debug, Clone)]
pub struct SplitPanel {
    pub train: PricePanel,
    pub test: PricePanel,
    pub split_index: usize,
}

/// Load a panel from CSV. Header must be `date,<ticker>,...`; empty cells
/// mark missing prices.
pub fn load_csv(path: &Path) -> Result<PricePanel> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| map_csv_error(e, &display))?;

    let headers = reader
        .headers()
        .map_err(|e| map_csv_error(e, &display))?
        .clone();
    if headers.is_empty() || headers.get(0).map(str::trim) != Some("date") {
        return Err(Error::MalformedCsv {
            path: display,
            line: 1,
            msg: "first header column must be `date`".to_string(),
        });
    }
    let tickers: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
    if tickers.is_empty() {
        return Err(Error::EmptyPanel);
    }

    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| map_csv_error(e, &display))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != tickers.len() + 1 {
            return Err(Error::MalformedCsv {
                path: display,
                line,
                msg: format!("expected {} columns, found {}", tickers.len() + 1, record.len()),
            });
        }
        let date_str = record.get(0).unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(date_str, "%Y-%m-%d").map_err(|_| Error::MalformedCsv {
            path: display.clone(),
            line,
            msg: format!("bad ISO date `{date_str}`"),
        })?;
        let mut row = Vec::with_capacity(tickers.len());
        for (c, cell) in record.iter().skip(1).enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                row.push(f64::NAN);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::MalformedCsv {
                path: display.clone(),
                line,
                msg: format!("bad price `{cell}` for {}", tickers[c]),
            })?;
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::NonPositivePrice {
                    ticker: tickers[c].clone(),
                    date: date.to_string(),
                    value: v,
                });
            }
            row.push(v);
        }
        dates.push(date);
        rows.push(row);
    }
    if dates.is_empty() {
        return Err(Error::EmptyPanel);
    }

    // sort ascending, rejecting duplicates
    let mut order: Vec<usize> = (0..dates.len()).collect();
    order.sort_by_key(|&i| dates[i]);
    for w in order.windows(2) {
        if dates[w[0]] == dates[w[1]] {
            return Err(Error::DuplicateDate {
                date: dates[w[0]].to_string(),
            });
        }
    }
    let sorted_dates: Vec<NaiveDate> = order.iter().map(|&i| dates[i]).collect();
    let mut prices = Array2::<f64>::zeros((sorted_dates.len(), tickers.len()));
    for (r, &i) in order.iter().enumerate() {
        for c in 0..tickers.len() {
            prices[[r, c]] = rows[i][c];
        }
    }
    PricePanel::new(sorted_dates, tickers, prices)
}

fn map_csv_error(e: csv::Error, path: &str) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io {
            path: path.to_string(),
            source: std::io::Error::other(e.to_string()),
        },
        _ => Error::MalformedCsv {
            path: path.to_string(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        },
    }
}

/// Serialize a panel back to the CSV interchange format. Missing entries
/// become empty cells.
pub fn panel_to_csv_string(panel: &PricePanel) -> String {
    let mut out = String::from("date");
    for t in panel.tickers() {
        out.push(',');
        out.push_str(t);
    }
    out.push('\n');
    for (r, date) in panel.dates().iter().enumerate() {
        out.push_str(&date.to_string());
        for c in 0..panel.n_series() {
            out.push(',');
            let v = panel.price(r, c);
            if !v.is_nan() {
                out.push_str(&format!("{v}"));
            }
        }
        out.push('\n');
    }
    out
}

/// Write a panel as CSV via an atomic temp-file rename.
pub fn write_csv(panel: &PricePanel, path: &Path) -> Result<()> {
    crate::io_util::atomic_write(path, panel_to_csv_string(panel).as_bytes())
}

/// Fill interior gaps by linear interpolation between the nearest known
/// neighbours of the same series; drop any series that still has missing
/// values afterwards (leading or trailing gaps are never extrapolated).
/// Returns the cleaned panel and the tickers that were dropped.
pub fn impute(panel: &PricePanel) -> Result<(PricePanel, Vec<String>)> {
    let t_len = panel.n_days();
    let mut kept_cols: Vec<usize> = Vec::new();
    let mut dropped: Vec<String> = Vec::new();
    let mut filled = panel.prices().clone();

    for c in 0..panel.n_series() {
        let col: Vec<f64> = panel.series(c).to_vec();
        let mut ok = true;
        let mut r = 0;
        while r < t_len {
            if !col[r].is_nan() {
                r += 1;
                continue;
            }
            // gap [r, gap_end)
            let gap_start = r;
            let mut gap_end = r;
            while gap_end < t_len && col[gap_end].is_nan() {
                gap_end += 1;
            }
            if gap_start == 0 || gap_end == t_len {
                ok = false; // leading or trailing gap
                break;
            }
            let left = col[gap_start - 1];
            let right = col[gap_end];
            let span = (gap_end - gap_start + 1) as f64;
            for (k, rr) in (gap_start..gap_end).enumerate() {
                let w = (k + 1) as f64 / span;
                filled[[rr, c]] = left + (right - left) * w;
            }
            r = gap_end;
        }
        if ok {
            kept_cols.push(c);
        } else {
            dropped.push(panel.tickers()[c].clone());
        }
    }

    if kept_cols.is_empty() {
        return Err(Error::EmptyPanel);
    }
    let tickers: Vec<String> = kept_cols.iter().map(|&c| panel.tickers()[c].clone()).collect();
    let mut prices = Array2::<f64>::zeros((t_len, kept_cols.len()));
    for (new_c, &c) in kept_cols.iter().enumerate() {
        for r in 0..t_len {
            prices[[r, new_c]] = filled[[r, c]];
        }
    }
    let cleaned = PricePanel::new(panel.dates().to_vec(), tickers, prices)?;
    debug_assert!(cleaned.is_complete());
    Ok((cleaned, dropped))
}

/// Split a panel into the earliest `train_frac` of rows and the remainder.
/// `split_index = floor(train_frac * T)`.
pub fn split(panel: &PricePanel, train_frac: f64) -> Result<SplitPanel> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidConfig {
            msg: format!("train_frac must be in (0,1), got {train_frac}"),
        });
    }
    let t_len = panel.n_days();
    let split_index = (train_frac * t_len as f64).floor() as usize;
    if split_index < 1 || split_index >= t_len {
        return Err(Error::PanelTooShort {
            needed: 2,
            actual: t_len,
        });
    }
    let take = |lo: usize, hi: usize| -> Result<PricePanel> {
        PricePanel::new(
            panel.dates()[lo..hi].to_vec(),
            panel.tickers().to_vec(),
            panel.prices().slice(ndarray::s![lo..hi, ..]).to_owned(),
        )
    };
    Ok(SplitPanel {
        train: take(0, split_index)?,
        test: take(split_index, t_len)?,
        split_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn day(n: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(n as u64)
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn loads_complete_panel() {
        let f = write_tmp("date,AAA,BBB\n2020-01-01,1.0,2.0\n2020-01-02,1.1,2.1\n2020-01-03,1.2,2.2\n");
        let p = load_csv(f.path()).unwrap();
        assert_eq!(p.n_days(), 3);
        assert_eq!(p.n_series(), 2);
        assert_eq!(p.missing_count(), 0);
        assert_eq!(p.price(1, 1), 2.1);
    }

    #[test]
    fn rejects_duplicate_date() {
        let f = write_tmp("date,AAA\n2020-01-01,1.0\n2020-01-01,1.1\n");
        let err = load_csv(f.path()).unwrap_err();
        assert!(matches!(err, Error::DuplicateDate { .. }));
    }

    #[test]
    fn rejects_non_positive_price() {
        let f = write_tmp("date,AAA\n2020-01-01,-1.0\n");
        let err = load_csv(f.path()).unwrap_err();
        assert!(matches!(err, Error::NonPositivePrice { .. }));
    }

    #[test]
    fn sorts_unordered_rows() {
        let f = write_tmp("date,AAA\n2020-01-03,3.0\n2020-01-01,1.0\n2020-01-02,2.0\n");
        let p = load_csv(f.path()).unwrap();
        let vals: Vec<f64> = p.series(0).to_vec();
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn imputes_interior_gap() {
        let prices = ndarray::array![[1.0], [f64::NAN], [3.0]];
        let p = PricePanel::new(vec![day(0), day(1), day(2)], vec!["A".into()], prices).unwrap();
        let (clean, dropped) = impute(&p).unwrap();
        assert!(dropped.is_empty());
        assert_eq!(clean.series(0).to_vec(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn drops_series_with_leading_gap() {
        let prices = ndarray::array![[f64::NAN, 5.0], [2.0, 6.0], [3.0, 7.0]];
        let p = PricePanel::new(
            vec![day(0), day(1), day(2)],
            vec!["A".into(), "B".into()],
            prices,
        )
        .unwrap();
        let (clean, dropped) = impute(&p).unwrap();
        assert_eq!(dropped, vec!["A".to_string()]);
        assert_eq!(clean.tickers(), &["B".to_string()]);
    }

    #[test]
    fn impute_identity_on_complete_panel() {
        let prices = ndarray::array![[1.0, 2.0], [3.0, 4.0]];
        let p = PricePanel::new(vec![day(0), day(1)], vec!["A".into(), "B".into()], prices).unwrap();
        let (clean, dropped) = impute(&p).unwrap();
        assert!(dropped.is_empty());
        assert_eq!(clean, p);
    }

    #[test]
    fn impute_is_idempotent_and_counts_add_up() {
        let prices = ndarray::array![
            [1.0, f64::NAN, 10.0],
            [f64::NAN, 2.0, 20.0],
            [3.0, 3.0, 30.0]
        ];
        let p = PricePanel::new(
            vec![day(0), day(1), day(2)],
            vec!["A".into(), "B".into(), "C".into()],
            prices,
        )
        .unwrap();
        let (once, dropped) = impute(&p).unwrap();
        assert_eq!(dropped.len() + once.n_series(), p.n_series());
        let (twice, dropped2) = impute(&once).unwrap();
        assert!(dropped2.is_empty());
        assert_eq!(once, twice);
    }

    #[test]
    fn split_matches_published_day_counts() {
        for (t, train, test) in [(1259usize, 1007usize, 252usize), (2513, 2010, 503), (2604, 2083, 521)] {
            let dates: Vec<NaiveDate> = (0..t as u32).map(day).collect();
            let prices = Array2::from_elem((t, 1), 1.0);
            let p = PricePanel::new(dates, vec!["A".into()], prices).unwrap();
            let s = split(&p, 0.8).unwrap();
            assert_eq!(s.train.n_days(), train, "T={t}");
            assert_eq!(s.test.n_days(), test, "T={t}");
        }
    }

    #[test]
    fn split_preserves_rows_bit_exactly() {
        let t = 13;
        let dates: Vec<NaiveDate> = (0..t as u32).map(day).collect();
        let prices = Array2::from_shape_fn((t, 2), |(r, c)| 1.0 + r as f64 * 0.7 + c as f64 * 0.001);
        let p = PricePanel::new(dates, vec!["A".into(), "B".into()], prices).unwrap();
        let s = split(&p, 0.8).unwrap();
        assert_eq!(s.train.n_days() + s.test.n_days(), t);
        for r in 0..s.train.n_days() {
            for c in 0..2 {
                assert_eq!(s.train.price(r, c).to_bits(), p.price(r, c).to_bits());
            }
        }
        for r in 0..s.test.n_days() {
            for c in 0..2 {
                assert_eq!(
                    s.test.price(r, c).to_bits(),
                    p.price(r + s.split_index, c).to_bits()
                );
            }
        }
    }

    #[test]
    fn split_rejects_tiny_panel() {
        let p = PricePanel::new(vec![day(0)], vec!["A".into()], Array2::from_elem((1, 1), 1.0)).unwrap();
        assert!(split(&p, 0.8).is_err());
    }
}
