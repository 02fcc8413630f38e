//! Ground-truth process generation and graph-recovery scoring.
//!
//! The generator draws sparse coefficient matrices B_0..B_tau (coefficient
//! slots become nonzero independently with probability `density`), rejects
//! draws that are non-stationary or statistically unidentifiable, then runs
//! the recursion forward on non-Gaussian noise and maps the series to
//! price-like positive levels with a per-series affine transform.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SummaryGraph;
use crate::linalg;
use crate::market_data::PricePanel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    Uniform,
    Laplace,
    /// Negative control: the causal order is unidentifiable under Gaussian
    /// disturbances, so recovery should degrade measurably.
    Gaussian,
}

impl NoiseFamily {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Self::Uniform),
            "laplace" => Ok(Self::Laplace),
            "gaussian" | "gauss" | "normal" => Ok(Self::Gaussian),
            other => Err(Error::InvalidConfig {
                msg: format!("unknown noise family `{other}`"),
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Laplace => "laplace",
            Self::Gaussian => "gaussian",
        }
    }

    /// Draw one unit-variance disturbance.
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Self::Uniform => {
                let s = 3.0_f64.sqrt();
                rng.random_range(-s..s)
            }
            Self::Laplace => {
                // inverse CDF, scale b = 1/sqrt(2) for unit variance
                let u: f64 = rng.random::<f64>() - 0.5;
                let b = std::f64::consts::FRAC_1_SQRT_2;
                -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            Self::Gaussian => StandardNormal.sample(rng),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneratorConfig {
    pub n_vars: usize,
    pub t_len: usize,
    pub tau: usize,
    /// Probability that any eligible coefficient slot is nonzero.
    pub density: f64,
    pub noise: NoiseFamily,
    pub seed: u64,
    /// Magnitudes are drawn uniformly from this band, sign 50/50.
    pub weight_low: f64,
    pub weight_high: f64,
    /// Whether diagonal slots at lags >= 1 participate (self-edges).
    pub self_edges: bool,
    pub max_spectral_radius: f64,
    /// Reject draws whose stationary correlation structure is too collinear
    /// for coefficient-level recovery (max variance inflation factor).
    /// None disables the guard (used by the profiler, which only needs a
    /// stationary panel).
    pub max_vif: Option<f64>,
    /// Reject draws in which some true edge falls below this magnitude on
    /// the standardized scale where the pruning threshold lives.
    pub min_std_weight: Option<f64>,
    pub max_retries: usize,
    pub price_base: f64,
    pub price_span: f64,
}

impl GeneratorConfig {
    pub fn new(n_vars: usize, t_len: usize, tau: usize, density: f64, noise: NoiseFamily, seed: u64) -> Self {
        Self {
            n_vars,
            t_len,
            tau,
            density,
            noise,
            seed,
            weight_low: 0.3,
            weight_high: 0.9,
            self_edges: true,
            max_spectral_radius: 0.95,
            max_vif: Some(1.9),
            min_std_weight: Some(0.22),
            max_retries: 20000,
            price_base: 100.0,
            price_span: 50.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_vars == 0 || self.t_len == 0 || self.tau == 0 {
            return Err(Error::InvalidConfig {
                msg: "n_vars, t_len and tau must be positive".to_string(),
            });
        }
        if !(0.0..=1.0).contains(&self.density) {
            return Err(Error::InvalidConfig {
                msg: format!("density must be in [0,1], got {}", self.density),
            });
        }
        if !(self.weight_low > 0.0 && self.weight_high >= self.weight_low) {
            return Err(Error::InvalidConfig {
                msg: "weight band must satisfy 0 < low <= high".to_string(),
            });
        }
        Ok(())
    }
}

/// The generating model and everything needed to score recovery against it.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// b[0] = instantaneous matrix, b[i] = lag-i matrix.
    pub b: Vec<Array2<f64>>,
    pub graph: SummaryGraph,
    pub order: Vec<usize>,
    pub noise: NoiseFamily,
    pub seed: u64,
    /// Rejected draws before this one was accepted.
    pub attempts: usize,
}

fn companion(ms: &[Array2<f64>], n: usize, tau: usize) -> Array2<f64> {
    let m = n * tau;
    let mut a = Array2::<f64>::zeros((m, m));
    for (l, mat) in ms.iter().enumerate() {
        for v in 0..n {
            for u in 0..n {
                a[[v, l * n + u]] = mat[[v, u]];
            }
        }
    }
    for i in 0..n * (tau - 1) {
        a[[n + i, i]] = 1.0;
    }
    a
}

/// Spectral radius estimate via the power method with geometric-mean growth
/// (robust to complex leading eigenvalue pairs).
fn spectral_radius(a: &Array2<f64>) -> f64 {
    let m = a.nrows();
    let mut v = Array1::<f64>::from_shape_fn(m, |i| ((i + 1) as f64).sin() + 1e-3);
    let norm = |x: &Array1<f64>| x.iter().map(|y| y * y).sum::<f64>().sqrt();
    let mut nv = norm(&v);
    if nv == 0.0 {
        return 0.0;
    }
    v /= nv;
    // warm-up
    for _ in 0..60 {
        v = a.dot(&v);
        nv = norm(&v);
        if nv < 1e-290 {
            return 0.0;
        }
        if nv > 1e100 {
            return f64::INFINITY;
        }
        v /= nv;
    }
    let steps = 240;
    let mut log_sum = 0.0;
    for _ in 0..steps {
        v = a.dot(&v);
        nv = norm(&v);
        if nv < 1e-290 {
            return 0.0;
        }
        if nv > 1e100 {
            return f64::INFINITY;
        }
        log_sum += nv.ln();
        v /= nv;
    }
    (log_sum / steps as f64).exp()
}

/// Stationary covariance of the companion state via fixed-point iteration
/// of S = A S A' + Q; returns the top-left n x n block.
fn stationary_covariance(a: &Array2<f64>, noise_cov: &Array2<f64>, n: usize) -> Array2<f64> {
    let m = a.nrows();
    let mut q = Array2::<f64>::zeros((m, m));
    for i in 0..n {
        for j in 0..n {
            q[[i, j]] = noise_cov[[i, j]];
        }
    }
    let mut s = q.clone();
    for _ in 0..500 {
        let next = a.dot(&s).dot(&a.t()) + &q;
        let diff = (&next - &s).iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
        s = next;
        if diff < 1e-13 {
            break;
        }
    }
    s.slice(ndarray::s![..n, ..n]).to_owned()
}

struct Draw {
    b: Vec<Array2<f64>>,
    a_inv: Array2<f64>,
    order: Vec<usize>,
}

fn draw_model(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Result<Option<Draw>> {
    let n = cfg.n_vars;
    // random causal order (position of each variable)
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    let mut pos = vec![0usize; n];
    for (p, &v) in perm.iter().enumerate() {
        pos[v] = p;
    }

    let weight = |rng: &mut ChaCha8Rng| -> f64 {
        let w = rng.random_range(cfg.weight_low..=cfg.weight_high);
        if rng.random::<bool>() {
            w
        } else {
            -w
        }
    };

    let mut b: Vec<Array2<f64>> = (0..=cfg.tau).map(|_| Array2::zeros((n, n))).collect();
    // instantaneous slots: only order-compatible off-diagonal entries keep
    // the graph acyclic at lag zero
    for v in 0..n {
        for u in 0..n {
            if u != v && pos[u] < pos[v] && rng.random::<f64>() < cfg.density {
                b[0][[v, u]] = weight(rng);
            }
        }
    }
    for l in 1..=cfg.tau {
        for v in 0..n {
            for u in 0..n {
                if u == v && !cfg.self_edges {
                    continue;
                }
                if rng.random::<f64>() < cfg.density {
                    b[l][[v, u]] = weight(rng);
                }
            }
        }
    }

    let eye = Array2::<f64>::eye(n);
    let i_minus_b0 = &eye - &b[0];
    let a_inv = match linalg::invert(&i_minus_b0) {
        Ok(m) => m,
        Err(_) => return Ok(None),
    };
    let ms: Vec<Array2<f64>> = (1..=cfg.tau).map(|l| a_inv.dot(&b[l])).collect();
    let comp = companion(&ms, n, cfg.tau);
    let sr = spectral_radius(&comp);
    if !(sr < cfg.max_spectral_radius) {
        return Ok(None);
    }

    if cfg.max_vif.is_some() || cfg.min_std_weight.is_some() {
        let noise_cov = a_inv.dot(&a_inv.t());
        let sigma = stationary_covariance(&comp, &noise_cov, n);
        let stds: Vec<f64> = (0..n).map(|i| sigma[[i, i]].max(0.0).sqrt()).collect();
        if stds.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Ok(None);
        }
        if let Some(cap) = cfg.max_vif {
            let mut corr = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                for j in 0..n {
                    corr[[i, j]] = sigma[[i, j]] / (stds[i] * stds[j]);
                }
            }
            match linalg::spd_inverse(&corr, "generator vif") {
                Ok(inv) => {
                    let vif = (0..n).map(|i| inv[[i, i]]).fold(0.0_f64, f64::max);
                    if vif > cap {
                        return Ok(None);
                    }
                }
                Err(_) => return Ok(None), // singular correlation: reject
            }
        }
        if let Some(floor) = cfg.min_std_weight {
            for mat in &b {
                for v in 0..n {
                    for u in 0..n {
                        let w = mat[[v, u]];
                        if w != 0.0 && w.abs() * stds[u] / stds[v] < floor {
                            return Ok(None);
                        }
                    }
                }
            }
        }
    }

    Ok(Some(Draw {
        b,
        a_inv,
        order: perm,
    }))
}

fn truth_graph(b: &[Array2<f64>], tickers: &[String]) -> Result<SummaryGraph> {
    let n = tickers.len();
    let mut edges: Vec<(usize, usize, BTreeSet<usize>)> = Vec::new();
    for u in 0..n {
        for v in 0..n {
            let mut lags = BTreeSet::new();
            for (l, mat) in b.iter().enumerate() {
                if mat[[v, u]] != 0.0 {
                    lags.insert(l);
                }
            }
            if !lags.is_empty() {
                edges.push((u, v, lags));
            }
        }
    }
    SummaryGraph::new(tickers.to_vec(), edges)
}

/// Generate a synthetic panel with known causal structure.
pub fn generate(cfg: &GeneratorConfig) -> Result<(PricePanel, GroundTruth)> {
    generate_with_deadline(cfg, None)
}

/// Like [`generate`], aborting cleanly if the rejection loop runs past
/// `deadline`.
pub fn generate_with_deadline(
    cfg: &GeneratorConfig,
    deadline: Option<std::time::Instant>,
) -> Result<(PricePanel, GroundTruth)> {
    cfg.validate()?;
    let n = cfg.n_vars;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut accepted = None;
    let mut attempts = 0usize;
    for _ in 0..cfg.max_retries {
        if let Some(d) = deadline {
            if attempts % 32 == 0 && std::time::Instant::now() >= d {
                return Err(Error::Timeout {
                    phase: "synthetic generation".to_string(),
                });
            }
        }
        attempts += 1;
        if let Some(draw) = draw_model(cfg, &mut rng)? {
            accepted = Some(draw);
            break;
        }
    }
    let draw = accepted.ok_or(Error::Unstationary { attempts })?;

    // simulate x_t = A_inv (sum_l B_l x_{t-l} + e_t)
    let burn = 10 * cfg.tau * n;
    let total = cfg.t_len + burn;
    let mut x = Array2::<f64>::zeros((total, n));
    let mut shock = Array1::<f64>::zeros(n);
    for t in 0..total {
        for i in 0..n {
            shock[i] = cfg.noise.sample(&mut rng);
        }
        for l in 1..=cfg.tau {
            if t >= l {
                for v in 0..n {
                    let mut acc = 0.0;
                    for u in 0..n {
                        acc += draw.b[l][[v, u]] * x[[t - l, u]];
                    }
                    shock[v] += acc;
                }
            }
        }
        let row = draw.a_inv.dot(&shock);
        for v in 0..n {
            let val = row[v];
            if !val.is_finite() || val.abs() > 1e9 {
                return Err(Error::Unstationary { attempts });
            }
            x[[t, v]] = val;
        }
    }

    let width = (n as f64).log10().floor() as usize + 1;
    let tickers: Vec<String> = (0..n).map(|i| format!("S{:0w$}", i + 1, w = width.max(3))).collect();
    let dates: Vec<NaiveDate> = (0..cfg.t_len as u64)
        .map(|d| NaiveDate::from_ymd_opt(2010, 1, 4).unwrap() + chrono::Days::new(d))
        .collect();

    let mut prices = Array2::<f64>::zeros((cfg.t_len, n));
    for c in 0..n {
        let mut max_abs = 1e-9_f64;
        for t in 0..cfg.t_len {
            max_abs = max_abs.max(x[[t + burn, c]].abs());
        }
        let scale = cfg.price_span / max_abs;
        for t in 0..cfg.t_len {
            prices[[t, c]] = cfg.price_base + scale * x[[t + burn, c]];
        }
    }
    let panel = PricePanel::new(dates, tickers.clone(), prices)?;
    let graph = truth_graph(&draw.b, &tickers)?;
    Ok((
        panel,
        GroundTruth {
            b: draw.b,
            graph,
            order: draw.order,
            noise: cfg.noise,
            seed: cfg.seed,
            attempts,
        },
    ))
}

/// Directed-edge precision/recall/F1 and structural Hamming distance.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GraphScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub shd: usize,
}

/// Score an estimated summary graph against the ground truth. The ticker
/// sets must match exactly.
pub fn score(estimated: &SummaryGraph, truth: &SummaryGraph) -> Result<GraphScore> {
    if estimated.tickers() != truth.tickers() {
        return Err(Error::TickerMismatch {
            msg: "estimated and truth graphs cover different tickers".to_string(),
        });
    }
    let est = estimated.edge_set();
    let tru = truth.edge_set();
    let tp = est.intersection(&tru).count();
    let precision = if est.is_empty() {
        1.0
    } else {
        tp as f64 / est.len() as f64
    };
    let recall = if tru.is_empty() {
        1.0
    } else {
        tp as f64 / tru.len() as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };

    // SHD: one per missing or extra edge, with an opposite-direction pair
    // counting once as a reversal
    let n = truth.tickers().len();
    let mut shd = 0usize;
    for u in 0..n {
        // self-edges: plain presence mismatch
        if est.contains(&(u, u)) != tru.contains(&(u, u)) {
            shd += 1;
        }
        for v in (u + 1)..n {
            let e_fwd = est.contains(&(u, v));
            let e_bwd = est.contains(&(v, u));
            let t_fwd = tru.contains(&(u, v));
            let t_bwd = tru.contains(&(v, u));
            let mismatches = (e_fwd != t_fwd) as usize + (e_bwd != t_bwd) as usize;
            if mismatches == 2 && e_fwd != e_bwd {
                shd += 1; // pure reversal
            } else {
                shd += mismatches;
            }
        }
    }
    Ok(GraphScore {
        precision,
        recall,
        f1,
        shd,
    })
}
