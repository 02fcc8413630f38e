//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use causeway::backtest::{self, BacktestConfig, EtaSpec};
use causeway::discovery::{self, LingamOptions};
use causeway::error::{Error, Result};
use causeway::graph::SummaryGraph;
use causeway::io_util::atomic_write;
use causeway::market_data::{self, PricePanel};
use causeway::profiling::{self, Timings};
use causeway::synthetic::{self, GeneratorConfig, NoiseFamily};

use crate::config_file::ConfigFile;
use crate::{BacktestArgs, DiscoverArgs, FetchArgs, ProfileArgs, SynthBenchArgs};

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidConfig {
        msg: format!("--{flag} is required (flag or config file)"),
    })
}

fn load_clean_panel(path: &Path) -> Result<PricePanel> {
    let raw = market_data::load_csv(path)?;
    let (clean, dropped) = market_data::impute(&raw)?;
    if !dropped.is_empty() {
        eprintln!(
            "causeway: dropped {} series with uninterpolatable gaps: {}",
            dropped.len(),
            dropped.join(",")
        );
    }
    Ok(clean)
}

fn validate_tau(tau: usize) -> Result<usize> {
    if tau == 0 {
        return Err(Error::InvalidConfig {
            msg: "tau must be >= 1".to_string(),
        });
    }
    Ok(tau)
}

fn parse_duration(text: &str) -> Result<Duration> {
    let t = text.trim();
    let (num, mult) = if let Some(rest) = t.strip_suffix('h') {
        (rest, 3600.0)
    } else if let Some(rest) = t.strip_suffix('m') {
        (rest, 60.0)
    } else if let Some(rest) = t.strip_suffix('s') {
        (rest, 1.0)
    } else {
        (t, 1.0)
    };
    let secs: f64 = num.trim().parse().map_err(|_| Error::InvalidConfig {
        msg: format!("bad duration `{text}` (use e.g. 90, 90s, 5m, 1h)"),
    })?;
    if secs <= 0.0 {
        return Err(Error::InvalidConfig {
            msg: "duration must be positive".to_string(),
        });
    }
    Ok(Duration::from_secs_f64(secs * mult))
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>().map_err(|_| Error::InvalidConfig {
                msg: format!("bad {what} entry `{s}`"),
            })
        })
        .collect()
}

pub fn discover(args: DiscoverArgs, file: &ConfigFile) -> Result<()> {
    let input: PathBuf = required(file.resolve_opt(args.input, "input")?, "input")?;
    let out_dir: PathBuf = required(file.resolve_opt(args.out_dir, "out-dir")?, "out-dir")?;
    let tau = validate_tau(file.resolve(args.tau, "tau", 1usize)?)?;
    let threshold = file.resolve(args.threshold, "threshold", 0.05f64)?;
    let seed = file.resolve(args.seed, "seed", 0u64)?;

    let panel = load_clean_panel(&input)?;
    let mut timings = Timings::new();
    let model = timings.time("discovery", || {
        discovery::varlingam(&panel, tau, &LingamOptions::default())
    })?;
    if model.low_confidence {
        eprintln!(
            "causeway: warning: disturbances look Gaussian; the causal order is low-confidence"
        );
    }
    let graph = discovery::summary_graph(&model, threshold);

    atomic_write(&out_dir.join("graph.json"), graph.to_json().as_bytes())?;
    atomic_write(&out_dir.join("graph.txt"), graph.to_edge_list().as_bytes())?;
    let peak_mb = profiling::peak_rss_mb();
    let summary = serde_json::json!({
        "input": input.display().to_string(),
        "tau": tau,
        "threshold": threshold,
        "seed": seed,
        "n_series": panel.n_series(),
        "n_days": panel.n_days(),
        "n_edges": graph.n_edges(),
        "low_confidence": model.low_confidence,
        "timing_seconds": timings.phases,
        "peak_mem_mb": peak_mb,
    });
    atomic_write(
        &out_dir.join("discover_summary.json"),
        serde_json::to_string_pretty(&summary).expect("json").as_bytes(),
    )?;
    eprintln!(
        "causeway: discovery over {} series x {} days: {} edges in {:.2}s, peak {} MB",
        panel.n_series(),
        panel.n_days(),
        graph.n_edges(),
        timings.get("discovery").unwrap_or(0.0),
        peak_mb.map(|m| format!("{m:.0}")).unwrap_or_else(|| "?".into()),
    );
    Ok(())
}

fn load_graph(source: &str, panel: &PricePanel, tau: usize) -> Result<SummaryGraph> {
    if source == "self" {
        return discovery::self_cause_graph(panel.tickers(), tau);
    }
    let path = Path::new(source);
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: source.to_string(),
        source: e,
    })?;
    if source.ends_with(".json") {
        SummaryGraph::from_json(&text)
    } else {
        SummaryGraph::from_edge_list(&text, panel.tickers().to_vec())
    }
}

pub fn backtest(args: BacktestArgs, file: &ConfigFile) -> Result<()> {
    let input: PathBuf = required(file.resolve_opt(args.input, "input")?, "input")?;
    let out_dir: PathBuf = required(file.resolve_opt(args.out_dir, "out-dir")?, "out-dir")?;
    let tau = validate_tau(file.resolve(args.tau, "tau", 1usize)?)?;
    let cost = file.resolve(args.cost, "cost", 0.001f64)?;
    let threshold = file.resolve(args.threshold, "threshold", 0.05f64)?;
    let train_frac = file.resolve(args.train_frac, "train-frac", 0.8f64)?;
    let seed = file.resolve(args.seed, "seed", 0u64)?;
    let refit_every = file.resolve(args.refit_every, "refit-every", 1usize)?;
    let eta_count = file.resolve_opt(args.eta, "eta")?;
    let eta_frac = file.resolve_opt(args.eta_frac, "eta-frac")?;
    let graph_src = file.resolve_opt(args.graph, "graph")?;
    let benchmark_path: Option<PathBuf> = file.resolve_opt(args.benchmark, "benchmark")?;

    let eta = match (eta_count, eta_frac) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidConfig {
                msg: "give either --eta or --eta-frac, not both".to_string(),
            })
        }
        (Some(c), None) => EtaSpec::Count(c),
        (None, Some(f)) => EtaSpec::Fraction(f),
        (None, None) => EtaSpec::Count(1),
    };

    let panel = load_clean_panel(&input)?;
    let split = market_data::split(&panel, train_frac)?;

    let mut timings = Timings::new();
    let graph = match (&graph_src, args.discover) {
        (Some(_), true) => {
            return Err(Error::InvalidConfig {
                msg: "give either --graph or --discover, not both".to_string(),
            })
        }
        (Some(src), false) => load_graph(src, &panel, tau)?,
        (None, true) => {
            let model = timings.time("discovery", || {
                discovery::varlingam(&split.train, tau, &LingamOptions::default())
            })?;
            if model.low_confidence {
                eprintln!("causeway: warning: training disturbances look Gaussian");
            }
            discovery::summary_graph(&model, threshold)
        }
        (None, false) => {
            return Err(Error::InvalidConfig {
                msg: "need a graph: pass --graph FILE, --graph self, or --discover".to_string(),
            })
        }
    };

    let benchmark = match &benchmark_path {
        Some(p) => Some(market_data::load_csv(p)?),
        None => None,
    };

    let cfg = BacktestConfig {
        tau,
        eta,
        cost,
        threshold,
        train_frac,
        seed,
        refit_every,
    };
    let mut report = timings.time("backtest", || {
        backtest::run(&panel, split.split_index, &graph, &cfg, benchmark.as_ref())
    })?;
    for (k, v) in timings.phases {
        report.timing.phases.insert(k, v);
    }

    write_report_files(&out_dir, &panel, &report)?;
    if args.dump_predictions {
        let mut dump = String::from("date,ticker,price_actual,price_predicted,return_predicted\n");
        let day_index: std::collections::BTreeMap<chrono::NaiveDate, usize> = panel
            .dates()
            .iter()
            .enumerate()
            .map(|(i, &d)| (d, i))
            .collect();
        for trade in &report.trades {
            let d = day_index[&trade.date];
            for (c, ticker) in panel.tickers().iter().enumerate() {
                dump.push_str(&format!(
                    "{},{ticker},{},{},{}\n",
                    trade.date,
                    panel.price(d, c),
                    trade.predicted_prices[c],
                    trade.predicted[c]
                ));
            }
        }
        atomic_write(&out_dir.join("predictions.csv"), dump.as_bytes())?;
    }
    eprintln!(
        "causeway: backtest over {} trade days: strategy cum {:.4}, control cum {:.4}{}",
        report.dates.len(),
        report.strategy.cumulative,
        report.control.cumulative,
        report
            .benchmark
            .as_ref()
            .map(|b| format!(", benchmark cum {:.4}", b.cumulative))
            .unwrap_or_default(),
    );
    Ok(())
}

fn write_report_files(out_dir: &Path, panel: &PricePanel, report: &backtest::BacktestReport) -> Result<()> {
    atomic_write(
        &out_dir.join("report.json"),
        serde_json::to_string_pretty(report).expect("report json").as_bytes(),
    )?;

    // per-day returns of all three series
    let mut daily = String::from("date,strategy,control,benchmark\n");
    for (i, date) in report.dates.iter().enumerate() {
        let bench = report
            .benchmark
            .as_ref()
            .and_then(|b| b.daily[i])
            .map(|v| v.to_string())
            .unwrap_or_default();
        daily.push_str(&format!(
            "{date},{},{},{bench}\n",
            report.strategy.daily[i], report.control.daily[i]
        ));
    }
    atomic_write(&out_dir.join("daily_returns.csv"), daily.as_bytes())?;

    // cumulative curves for plotting; benchmark holds its last level over
    // unaligned days
    let mut cum = String::from("date,strategy,control,benchmark\n");
    let mut bench_level = 1.0_f64;
    for (i, date) in report.dates.iter().enumerate() {
        let bench_cell = match report.benchmark.as_ref() {
            Some(b) => {
                if let Some(r) = b.daily[i] {
                    bench_level *= 1.0 + r;
                }
                format!("{}", bench_level - 1.0)
            }
            None => String::new(),
        };
        cum.push_str(&format!(
            "{date},{},{},{bench_cell}\n",
            report.strategy.cumulative_curve[i], report.control.cumulative_curve[i]
        ));
    }
    atomic_write(&out_dir.join("cumulative.csv"), cum.as_bytes())?;

    // trade blotter, one row per position
    let mut blotter = String::from("date,side,ticker,predicted_return,realized_return\n");
    let day_index: std::collections::BTreeMap<chrono::NaiveDate, usize> = panel
        .dates()
        .iter()
        .enumerate()
        .map(|(i, &d)| (d, i))
        .collect();
    for trade in &report.trades {
        let d = day_index[&trade.date];
        let mut row = |side: &str, ticker: &String| {
            let idx = panel.ticker_index(ticker).expect("ticker in panel");
            let realized =
                (panel.price(d + 1, idx) - panel.price(d, idx)) / panel.price(d, idx);
            blotter.push_str(&format!(
                "{},{side},{ticker},{},{realized}\n",
                trade.date, trade.predicted[idx]
            ));
        };
        for w in &trade.winners {
            row("long", w);
        }
        for l in &trade.losers {
            row("short", l);
        }
    }
    atomic_write(&out_dir.join("blotter.csv"), blotter.as_bytes())?;

    let comparison = backtest::compare(report);
    atomic_write(
        &out_dir.join("comparison.json"),
        serde_json::to_string_pretty(&comparison).expect("comparison json").as_bytes(),
    )?;
    Ok(())
}

pub fn synth_bench(args: SynthBenchArgs, file: &ConfigFile) -> Result<()> {
    let out: PathBuf = required(file.resolve_opt(args.out, "out")?, "out")?;
    let n_vars: Vec<usize> = parse_list(&file.resolve(args.n_vars, "n-vars", "10".to_string())?, "n-vars")?;
    let t_lens: Vec<usize> = parse_list(&file.resolve(args.t_len, "t-len", "2000".to_string())?, "t-len")?;
    let taus: Vec<usize> = parse_list(&file.resolve(args.tau, "tau", "1".to_string())?, "tau")?;
    let noise_names: Vec<String> =
        parse_list(&file.resolve(args.noise, "noise", "uniform".to_string())?, "noise")?;
    let noises: Vec<NoiseFamily> = noise_names
        .iter()
        .map(|s| NoiseFamily::parse(s))
        .collect::<Result<_>>()?;
    let density = file.resolve(args.density, "density", 0.2f64)?;
    let seeds = file.resolve(args.seeds, "seeds", 20u64)?;
    let base_seed = file.resolve(args.seed, "seed", 0u64)?;
    let threshold = file.resolve(args.threshold, "threshold", 0.05f64)?;
    let budget = match file.resolve_opt(args.time_budget, "time-budget")? {
        Some(text) => Some(parse_duration(&text)?),
        None => None,
    };

    let mut csv = String::from(
        "n_vars,T,tau,noise,seed,precision,recall,f1,shd,wall_seconds,peak_mem_mb,status\n",
    );
    let mut cell_means: Vec<(String, f64, usize)> = Vec::new();
    for &n in &n_vars {
        for &t in &t_lens {
            for &tau in &taus {
                for &noise in &noises {
                    let mut f1_sum = 0.0;
                    let mut f1_count = 0usize;
                    for s in 0..seeds {
                        let seed = base_seed + s;
                        let started = Instant::now();
                        let deadline = budget.map(|b| started + b);
                        let outcome = run_bench_cell(n, t, tau, noise, seed, density, threshold, deadline);
                        let wall = started.elapsed().as_secs_f64();
                        let peak = profiling::peak_rss_mb().unwrap_or(0.0);
                        match outcome {
                            Ok(score) => {
                                csv.push_str(&format!(
                                    "{n},{t},{tau},{},{seed},{},{},{},{},{wall:.3},{peak:.1},ok\n",
                                    noise.name(),
                                    score.precision,
                                    score.recall,
                                    score.f1,
                                    score.shd
                                ));
                                f1_sum += score.f1;
                                f1_count += 1;
                            }
                            Err(Error::Timeout { .. }) => {
                                csv.push_str(&format!(
                                    "{n},{t},{tau},{},{seed},,,,,{wall:.3},{peak:.1},timeout\n",
                                    noise.name()
                                ));
                            }
                            Err(e) => {
                                csv.push_str(&format!(
                                    "{n},{t},{tau},{},{seed},,,,,{wall:.3},{peak:.1},error:{:?}\n",
                                    noise.name(),
                                    e.kind()
                                ));
                            }
                        }
                    }
                    if f1_count > 0 {
                        cell_means.push((
                            format!("n={n} T={t} tau={tau} noise={}", noise.name()),
                            f1_sum / f1_count as f64,
                            f1_count,
                        ));
                    }
                }
            }
        }
    }
    atomic_write(&out, csv.as_bytes())?;
    for (cell, mean, count) in &cell_means {
        eprintln!("causeway: {cell}: mean F1 {mean:.3} over {count} seeds");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_bench_cell(
    n: usize,
    t: usize,
    tau: usize,
    noise: NoiseFamily,
    seed: u64,
    density: f64,
    threshold: f64,
    deadline: Option<Instant>,
) -> Result<synthetic::GraphScore> {
    let check = |phase: &str| -> Result<()> {
        if let Some(d) = deadline {
            if Instant::now() >= d {
                return Err(Error::Timeout {
                    phase: phase.to_string(),
                });
            }
        }
        Ok(())
    };
    check("generate")?;
    let cfg = GeneratorConfig::new(n, t, tau, density, noise, seed);
    let (panel, truth) = synthetic::generate_with_deadline(&cfg, deadline)?;
    check("discovery")?;
    let opts = LingamOptions {
        deadline,
        ..LingamOptions::default()
    };
    let model = discovery::varlingam(&panel, tau, &opts)?;
    let est = discovery::summary_graph(&model, threshold);
    synthetic::score(&est, &truth.graph)
}

pub fn profile(args: ProfileArgs, file: &ConfigFile) -> Result<()> {
    let out: PathBuf = required(file.resolve_opt(args.out, "out")?, "out")?;
    let sizes_text = required(file.resolve_opt(args.sizes, "sizes")?, "sizes")?;
    let tau = validate_tau(file.resolve(args.tau, "tau", 1usize)?)?;
    let seed = file.resolve(args.seed, "seed", 0u64)?;
    let mem_cap: Option<f64> = file.resolve_opt(args.mem_cap, "mem-cap")?;

    let mut sizes: Vec<(usize, usize)> = Vec::new();
    for part in sizes_text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (n, t) = part.split_once('x').ok_or_else(|| Error::InvalidConfig {
            msg: format!("bad size `{part}`, expected NxT like 20x1000"),
        })?;
        sizes.push((
            n.trim().parse().map_err(|_| Error::InvalidConfig {
                msg: format!("bad series count in `{part}`"),
            })?,
            t.trim().parse().map_err(|_| Error::InvalidConfig {
                msg: format!("bad day count in `{part}`"),
            })?,
        ));
    }

    let mut csv = String::from("n_vars,t_len,tau,wall_seconds,peak_mem_mb,status\n");
    let mut points: Vec<(f64, f64)> = Vec::new();
    for &(n, t) in &sizes {
        let estimate = profiling::discovery_memory_estimate_bytes(n, t, tau);
        if let Some(cap_gb) = mem_cap {
            let cap = (cap_gb * 1e9) as u64;
            if estimate > cap {
                csv.push_str(&format!(
                    "{n},{t},{tau},,{:.1},memory_limit\n",
                    estimate as f64 / 1e6
                ));
                eprintln!(
                    "causeway: {n}x{t}: estimated {:.0} MB exceeds cap {:.0} MB, skipped",
                    estimate as f64 / 1e6,
                    cap as f64 / 1e6
                );
                continue;
            }
        }
        // guards off: the profiler only needs a stationary panel
        let mut gen_cfg = GeneratorConfig::new(
            n,
            t,
            tau,
            (1.2 / (n as f64 * tau as f64)).min(0.2),
            NoiseFamily::Uniform,
            seed,
        );
        gen_cfg.max_vif = None;
        gen_cfg.min_std_weight = None;
        let (panel, _) = synthetic::generate(&gen_cfg)?;
        let started = Instant::now();
        let model = discovery::varlingam(&panel, tau, &LingamOptions::default())?;
        let wall = started.elapsed().as_secs_f64();
        let peak = profiling::peak_rss_mb().unwrap_or(0.0);
        let edges = discovery::summary_graph(&model, 0.05).n_edges();
        csv.push_str(&format!("{n},{t},{tau},{wall:.3},{peak:.1},ok\n"));
        eprintln!("causeway: {n}x{t} tau={tau}: {wall:.2}s, peak {peak:.0} MB, {edges} edges");
        points.push((n as f64, wall));
    }
    atomic_write(&out, csv.as_bytes())?;

    let exponent = profiling::growth_exponent(&points);
    match exponent {
        Some(e) => eprintln!("causeway: fitted wall-time growth exponent in N: {e:.2}"),
        None => eprintln!("causeway: growth exponent: n/a (need >= 2 measured sizes)"),
    }
    let summary = serde_json::json!({
        "tau": tau,
        "seed": seed,
        "sizes": sizes,
        "growth_exponent": exponent,
    });
    let summary_path = out.with_extension("summary.json");
    atomic_write(
        &summary_path,
        serde_json::to_string_pretty(&summary).expect("json").as_bytes(),
    )?;
    Ok(())
}

pub fn fetch(args: FetchArgs, file: &ConfigFile) -> Result<()> {
    let endpoint = required(file.resolve_opt(args.endpoint, "endpoint")?, "endpoint")?;
    let out: PathBuf = required(file.resolve_opt(args.out, "out")?, "out")?;
    let tickers_text = file.resolve(args.tickers, "tickers", String::new())?;
    let tickers: Vec<String> = tickers_text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    let start_text = required(file.resolve_opt(args.start, "start")?, "start")?;
    let end_text = required(file.resolve_opt(args.end, "end")?, "end")?;
    let parse_date = |s: &str| {
        chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| Error::InvalidConfig {
            msg: format!("bad date `{s}`"),
        })
    };
    let start = parse_date(&start_text)?;
    let end = parse_date(&end_text)?;
    let default_cache = std::env::var("CAUSEWAY_CACHE_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|_| PathBuf::from(".causeway-cache"));
    let cache_dir: PathBuf = file.resolve(args.cache_dir, "cache-dir", default_cache)?;

    if tickers.is_empty() {
        atomic_write(&out, b"date\n")?;
        eprintln!("causeway: no tickers requested, wrote empty panel");
        return Ok(());
    }

    let cfg = causeway::fetch::FetchConfig::new(endpoint, cache_dir);
    let outcome = causeway::fetch_remote(&cfg, &tickers, start, end)?;
    for (ticker, msg) in &outcome.failed {
        eprintln!("causeway: fetch failed for {ticker}: {msg}");
    }
    match outcome.panel {
        Some(panel) => {
            market_data::write_csv(&panel, &out)?;
            eprintln!(
                "causeway: wrote {} series x {} days ({} fetched, {} cached, {} failed)",
                panel.n_series(),
                panel.n_days(),
                outcome.fetched.len(),
                outcome.cached.len(),
                outcome.failed.len()
            );
            Ok(())
        }
        None => Err(Error::Fetch {
            ticker: tickers.join(","),
            msg: "no series could be fetched".to_string(),
        }),
    }
}
