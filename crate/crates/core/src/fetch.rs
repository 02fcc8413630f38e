//! Remote CSV fetching with an on-disk cache.
//!
//! The endpoint is a URL template with `{ticker}`, `{start}` and `{end}`
//! placeholders; each ticker's response must be a CSV whose first column is
//! an ISO date and whose price column is named `close`, `adj_close` or
//! `price` (falling back to the second column). Responses are cached per
//! (ticker, range) and never re-fetched.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use chrono::NaiveDate;
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::io_util::atomic_write;
use crate::market_data::PricePanel;

#[derive(Debug, Clone)]
pub struct FetchConfig {
    /// URL template, e.g. `http://host/prices?t={ticker}&from={start}&to={end}`.
    pub endpoint: String,
    pub cache_dir: PathBuf,
    /// Attempts per ticker (first try plus retries).
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
    pub backoff_cap_ms: u64,
}

impl FetchConfig {
    pub fn new(endpoint: impl Into<String>, cache_dir: impl Into<PathBuf>) -> Self {
        Self {
            endpoint: endpoint.into(),
            cache_dir: cache_dir.into(),
            max_attempts: 3,
            backoff_base_ms: 100,
            backoff_cap_ms: 2000,
        }
    }
}

/// Result of a fetch run; per-ticker failures never abort the rest.
#[derive(Debug)]
pub struct FetchOutcome {
    /// Merged panel, None when no series succeeded (or no tickers given).
    pub panel: Option<PricePanel>,
    pub fetched: Vec<String>,
    pub cached: Vec<String>,
    pub failed: Vec<(String, String)>,
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn cache_path(cfg: &FetchConfig, ticker: &str, start: NaiveDate, end: NaiveDate) -> PathBuf {
    cfg.cache_dir
        .join(format!("{}_{}_{}.csv", sanitize(ticker), start, end))
}

fn http_get(url: &str, attempts: u32, base_ms: u64, cap_ms: u64) -> std::result::Result<String, String> {
    let mut last = String::new();
    for attempt in 0..attempts {
        if attempt > 0 {
            let delay = (base_ms << (attempt - 1)).min(cap_ms);
            std::thread::sleep(Duration::from_millis(delay));
        }
        match ureq::get(url).call() {
            Ok(mut resp) => match resp.body_mut().read_to_string() {
                Ok(text) => return Ok(text),
                Err(e) => last = format!("body read failed: {e}"),
            },
            Err(ureq::Error::StatusCode(code)) => {
                last = format!("HTTP {code}");
                if (400..500).contains(&code) {
                    // a client error will not get better on retry
                    return Err(last);
                }
            }
            Err(e) => last = e.to_string(),
        }
    }
    Err(last)
}

/// Parse one per-ticker CSV response into (date, price) pairs.
fn parse_ticker_csv(text: &str, ticker: &str) -> Result<Vec<(NaiveDate, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::Fetch {
            ticker: ticker.to_string(),
            msg: format!("bad header: {e}"),
        })?
        .clone();
    if headers.is_empty() {
        return Err(Error::Fetch {
            ticker: ticker.to_string(),
            msg: "empty response".to_string(),
        });
    }
    let price_col = headers
        .iter()
        .position(|h| {
            let h = h.trim().to_ascii_lowercase();
            h == "close" || h == "adj_close" || h == "adjclose" || h == "price"
        })
        .unwrap_or(1);
    if headers.len() <= price_col {
        return Err(Error::Fetch {
            ticker: ticker.to_string(),
            msg: "response has no price column".to_string(),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Fetch {
            ticker: ticker.to_string(),
            msg: format!("bad row: {e}"),
        })?;
        let date_str = rec.get(0).unwrap_or("").trim().to_string();
        let date = NaiveDate::parse_from_str(&date_str, "%Y-%m-%d").map_err(|_| Error::Fetch {
            ticker: ticker.to_string(),
            msg: format!("bad date `{date_str}`"),
        })?;
        let cell = rec.get(price_col).unwrap_or("").trim().to_string();
        if cell.is_empty() {
            continue;
        }
        let price: f64 = cell.parse().map_err(|_| Error::Fetch {
            ticker: ticker.to_string(),
            msg: format!("bad price `{cell}`"),
        })?;
        if !price.is_finite() || price <= 0.0 {
            return Err(Error::Fetch {
                ticker: ticker.to_string(),
                msg: format!("non-positive price {price} on {date}"),
            });
        }
        out.push((date, price));
    }
    Ok(out)
}

/// Fetch (or read from cache) each ticker's series over the date range and
/// merge them into a single panel aligned on the union of dates.
pub fn fetch_remote(
    cfg: &FetchConfig,
    tickers: &[String],
    start: NaiveDate,
    end: NaiveDate,
) -> Result<FetchOutcome> {
    let mut fetched = Vec::new();
    let mut cached = Vec::new();
    let mut failed = Vec::new();
    let mut series: Vec<(String, Vec<(NaiveDate, f64)>)> = Vec::new();

    for ticker in tickers {
        let path = cache_path(cfg, ticker, start, end);
        let text = if path.exists() {
            match std::fs::read_to_string(&path) {
                Ok(t) => {
                    cached.push(ticker.clone());
                    t
                }
                Err(e) => {
                    failed.push((ticker.clone(), format!("cache unreadable: {e}")));
                    continue;
                }
            }
        } else {
            let url = cfg
                .endpoint
                .replace("{ticker}", ticker)
                .replace("{start}", &start.to_string())
                .replace("{end}", &end.to_string());
            match http_get(&url, cfg.max_attempts, cfg.backoff_base_ms, cfg.backoff_cap_ms) {
                Ok(text) => {
                    atomic_write(&path, text.as_bytes())?;
                    fetched.push(ticker.clone());
                    text
                }
                Err(msg) => {
                    failed.push((ticker.clone(), msg));
                    continue;
                }
            }
        };
        match parse_ticker_csv(&text, ticker) {
            Ok(rows) if !rows.is_empty() => series.push((ticker.clone(), rows)),
            Ok(_) => failed.push((ticker.clone(), "no rows in range".to_string())),
            Err(e) => failed.push((ticker.clone(), e.to_string())),
        }
    }

    if series.is_empty() {
        return Ok(FetchOutcome {
            panel: None,
            fetched,
            cached,
            failed,
        });
    }

    // union of dates, ascending
    let mut all_dates: BTreeMap<NaiveDate, usize> = BTreeMap::new();
    for (_, rows) in &series {
        for (d, _) in rows {
            all_dates.entry(*d).or_insert(0);
        }
    }
    for (i, (_, idx)) in all_dates.iter_mut().enumerate() {
        *idx = i;
    }
    let dates: Vec<NaiveDate> = all_dates.keys().copied().collect();
    let mut prices = Array2::<f64>::from_elem((dates.len(), series.len()), f64::NAN);
    for (c, (_, rows)) in series.iter().enumerate() {
        for (d, p) in rows {
            prices[[all_dates[d], c]] = *p;
        }
    }
    let names: Vec<String> = series.iter().map(|(t, _)| t.clone()).collect();
    let panel = PricePanel::new(dates, names, prices)?;
    Ok(FetchOutcome {
        panel: Some(panel),
        fetched,
        cached,
        failed,
    })
}
