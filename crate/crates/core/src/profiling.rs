//! Wall-clock and memory instrumentation.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

/// Named wall-clock phases, seconds.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub phases: BTreeMap<String, f64>,
}

impl Timings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Time a closure and record it under `name` (accumulating on repeats).
    pub fn time<R>(&mut self, name: &str, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let out = f();
        *self.phases.entry(name.to_string()).or_insert(0.0) += start.elapsed().as_secs_f64();
        out
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.phases.get(name).copied()
    }
}

/// Peak resident set size of this process in MB, via getrusage with a
/// procfs fallback. None when neither source is usable.
pub fn peak_rss_mb() -> Option<f64> {
    unsafe {
        let mut ru: libc::rusage = std::mem::zeroed();
        if libc::getrusage(libc::RUSAGE_SELF, &mut ru) == 0 && ru.ru_maxrss > 0 {
            // ru_maxrss is KB on Linux
            return Some(ru.ru_maxrss as f64 / 1024.0);
        }
    }
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    for line in status.lines() {
        if let Some(rest) = line.strip_prefix("VmHWM:") {
            let kb: f64 = rest.trim().trim_end_matches("kB").trim().parse().ok()?;
            return Some(kb / 1024.0);
        }
    }
    None
}

/// Rough upper bound on the heap the discovery stage needs for an
/// N-series, T-day panel at lag tau, in bytes. Dominated by the VAR design
/// matrix, its normal equations, and the working copies of the data.
pub fn discovery_memory_estimate_bytes(n: usize, t: usize, tau: usize) -> u64 {
    let n = n as u64;
    let t = t as u64;
    let tau = tau as u64;
    let k = n * tau + 1;
    let doubles = t.saturating_sub(tau) * k  // design matrix
        + k * k                              // normal equations
        + k * n                              // solution
        + 6 * t * n                          // panel + standardized + residual copies
        + (tau + 2) * n * n                  // coefficient matrices
        + n * n / 2; // pair statistics
    doubles * 8 * 5 / 4 // 25% slack
}

/// Fitted growth exponent from (size, seconds) pairs via least squares on
/// the log-log scale. None with fewer than two usable points.
pub fn growth_exponent(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(s, w)| *s > 0.0 && *w > 0.0)
        .map(|(s, w)| (s.ln(), w.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|(x, _)| x).sum::<f64>() / n;
    let my = logs.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_phase_time() {
        let mut t = Timings::new();
        let v = t.time("work", || 21 * 2);
        assert_eq!(v, 42);
        assert!(t.get("work").unwrap() >= 0.0);
    }

    #[test]
    fn peak_rss_is_positive_on_linux() {
        if let Some(mb) = peak_rss_mb() {
            assert!(mb > 0.0);
        }
    }

    #[test]
    fn exponent_of_quadratic_scaling() {
        let pts: Vec<(f64, f64)> = [10.0, 20.0, 40.0].iter().map(|&s| (s, 0.001 * s * s)).collect();
        let e = growth_exponent(&pts).unwrap();
        assert!((e - 2.0).abs() < 1e-9);
    }

    #[test]
    fn exponent_needs_two_points() {
        assert!(growth_exponent(&[(10.0, 1.0)]).is_none());
        assert!(growth_exponent(&[]).is_none());
    }
}
