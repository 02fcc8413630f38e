//! Summary graphs over tickers.
//!
//! An edge `u -> v` means series `u` is a driving force of series `v` at one
//! or more lags; the lag set is kept as provenance. Two interchange formats
//! are supported: a JSON document and a plain edge-list text file with one
//! `u -> v [lags]` line per edge.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Directed graph over tickers with per-edge lag provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryGraph {
    tickers: Vec<String>,
    /// (src, dst) series indices -> lags at which the edge was detected.
    edges: BTreeMap<(usize, usize), BTreeSet<usize>>,
    /// parents_of[v] = ordered list of parent indices (including v itself
    /// when a self-edge exists).
    parents_of: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    tickers: Vec<String>,
    edges: Vec<EdgeDoc>,
}

#[derive(Serialize, Deserialize)]
struct EdgeDoc {
    src: String,
    dst: String,
    lags: Vec<usize>,
}

impl SummaryGraph {
    pub fn new(
        tickers: Vec<String>,
        edge_iter: impl IntoIterator<Item = (usize, usize, BTreeSet<usize>)>,
    ) -> Result<Self> {
        if tickers.is_empty() {
            return Err(Error::EmptyPanel);
        }
        let n = tickers.len();
        let mut edges: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
        for (src, dst, lags) in edge_iter {
            if src >= n || dst >= n {
                return Err(Error::UnknownTicker {
                    ticker: format!("index {}", src.max(dst)),
                });
            }
            if src == dst && lags.iter().any(|&l| l == 0) {
                return Err(Error::Domain {
                    msg: format!("self-edge on {} at lag 0", tickers[src]),
                });
            }
            if lags.is_empty() {
                continue;
            }
            edges.entry((src, dst)).or_default().extend(lags);
        }
        let mut parents_of = vec![Vec::new(); n];
        for &(src, dst) in edges.keys() {
            parents_of[dst].push(src);
        }
        Ok(Self {
            tickers,
            edges,
            parents_of,
        })
    }

    /// Graph whose only edges are X -> X for every ticker, at lags 1..=tau.
    pub fn self_cause(tickers: &[String], tau: usize) -> Result<Self> {
        if tickers.is_empty() {
            return Err(Error::EmptyPanel);
        }
        let lags: BTreeSet<usize> = (1..=tau.max(1)).collect();
        let edges = (0..tickers.len()).map(|i| (i, i, lags.clone()));
        Self::new(tickers.to_vec(), edges)
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn n_nodes(&self) -> usize {
        self.tickers.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.edges.contains_key(&(src, dst))
    }

    pub fn lags(&self, src: usize, dst: usize) -> Option<&BTreeSet<usize>> {
        self.edges.get(&(src, dst))
    }

    /// Parent indices of `v`, in ascending index order.
    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents_of[v]
    }

    pub fn edge_set(&self) -> BTreeSet<(usize, usize)> {
        self.edges.keys().copied().collect()
    }

    pub fn iter_edges(&self) -> impl Iterator<Item = (usize, usize, &BTreeSet<usize>)> {
        self.edges.iter().map(|(&(s, d), lags)| (s, d, lags))
    }

    pub fn to_json(&self) -> String {
        let doc = GraphDoc {
            tickers: self.tickers.clone(),
            edges: self
                .edges
                .iter()
                .map(|(&(s, d), lags)| EdgeDoc {
                    src: self.tickers[s].clone(),
                    dst: self.tickers[d].clone(),
                    lags: lags.iter().copied().collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("graph serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphDoc = serde_json::from_str(text).map_err(|e| Error::MalformedCsv {
            path: "<graph json>".to_string(),
            line: e.line() as u64,
            msg: e.to_string(),
        })?;
        let index: BTreeMap<&str, usize> = doc
            .tickers
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        let mut edges = Vec::new();
        for e in &doc.edges {
            let src = *index.get(e.src.as_str()).ok_or_else(|| Error::UnknownTicker {
                ticker: e.src.clone(),
            })?;
            let dst = *index.get(e.dst.as_str()).ok_or_else(|| Error::UnknownTicker {
                ticker: e.dst.clone(),
            })?;
            edges.push((src, dst, e.lags.iter().copied().collect()));
        }
        Self::new(doc.tickers, edges)
    }

    /// Edge-list text: one `u -> v [l0 l1 ...]` line per edge, sorted.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (&(s, d), lags) in &self.edges {
            let lag_str: Vec<String> = lags.iter().map(|l| l.to_string()).collect();
            out.push_str(&format!(
                "{} -> {} [{}]\n",
                self.tickers[s],
                self.tickers[d],
                lag_str.join(" ")
            ));
        }
        out
    }

    pub fn from_edge_list(text: &str, tickers: Vec<String>) -> Result<Self> {
        let index: BTreeMap<&str, usize> = tickers
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| Error::MalformedCsv {
                path: "<edge list>".to_string(),
                line: (lineno + 1) as u64,
                msg,
            };
            let (pair, lags_part) = match line.split_once('[') {
                Some((p, rest)) => {
                    let lags = rest
                        .trim_end_matches(']')
                        .split_whitespace()
                        .map(|s| s.parse::<usize>())
                        .collect::<std::result::Result<BTreeSet<usize>, _>>()
                        .map_err(|e| parse_err(format!("bad lag list: {e}")))?;
                    (p, lags)
                }
                None => (line, BTreeSet::from([1])),
            };
            let (src_s, dst_s) = pair
                .split_once("->")
                .ok_or_else(|| parse_err("expected `src -> dst`".to_string()))?;
            let src = *index
                .get(src_s.trim())
                .ok_or_else(|| Error::UnknownTicker {
                    ticker: src_s.trim().to_string(),
                })?;
            let dst = *index
                .get(dst_s.trim())
                .ok_or_else(|| Error::UnknownTicker {
                    ticker: dst_s.trim().to_string(),
                })?;
            edges.push((src, dst, lags_part));
        }
        Self::new(tickers, edges)
    }
}
