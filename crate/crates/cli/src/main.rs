//! Single executable exposing the pipeline as subcommands.

mod commands;
mod config_file;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config_file::ConfigFile;

#[derive(Parser)]
#[command(
    name = "causeway",
    version,
    about = "Causal driving-force discovery and long-short backtesting on daily price panels"
)]
struct Cli {
    /// Key=value config file mirroring the long flag names; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Cap on worker threads for parallel sections.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the driving-force graph from a price panel
    Discover(DiscoverArgs),
    /// Walk-forward long-short backtest against control and benchmark
    Backtest(BacktestArgs),
    /// Graph-recovery benchmark on synthetic ground-truth processes
    SynthBench(SynthBenchArgs),
    /// Wall-clock and memory scaling of the discovery stage
    Profile(ProfileArgs),
    /// Fetch per-ticker CSVs from an HTTP endpoint and merge into a panel
    Fetch(FetchArgs),
}

#[derive(Args)]
pub struct DiscoverArgs {
    /// Price panel CSV (`date,<ticker>,...`).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory for graph.json / graph.txt / discover_summary.json.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// VAR lag order.
    #[arg(long)]
    tau: Option<usize>,
    /// Edge pruning threshold on standardized coefficients.
    #[arg(long)]
    threshold: Option<f64>,
    /// Seed echoed into the summary (discovery itself is deterministic).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
pub struct BacktestArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Graph source: a graph.json / edge-list path, or `self` for the
    /// self-cause control graph.
    #[arg(long)]
    graph: Option<String>,
    /// Run discovery on the training window instead of reading a graph file.
    #[arg(long)]
    discover: bool,
    #[arg(long)]
    tau: Option<usize>,
    /// Winner/loser count per side.
    #[arg(long)]
    eta: Option<usize>,
    /// Winner count as a fraction of the panel width (rounded, floor 1).
    #[arg(long)]
    eta_frac: Option<f64>,
    /// Flat daily transaction cost.
    #[arg(long)]
    cost: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    train_frac: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Refit the per-stock models every k test days.
    #[arg(long)]
    refit_every: Option<usize>,
    /// Benchmark index/ETF price CSV aligned by date.
    #[arg(long)]
    benchmark: Option<PathBuf>,
    /// Also write predictions.csv with every ticker's per-day predicted
    /// price and return.
    #[arg(long)]
    dump_predictions: bool,
}

#[derive(Args)]
pub struct SynthBenchArgs {
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated variable counts, e.g. `5,10`.
    #[arg(long)]
    n_vars: Option<String>,
    /// Comma-separated series lengths.
    #[arg(long)]
    t_len: Option<String>,
    /// Comma-separated lag orders.
    #[arg(long)]
    tau: Option<String>,
    /// Comma-separated noise families (uniform, laplace, gaussian).
    #[arg(long)]
    noise: Option<String>,
    /// Coefficient-slot density of the generated processes.
    #[arg(long)]
    density: Option<f64>,
    /// Seeds per grid cell (0..seeds, offset by --seed).
    #[arg(long)]
    seeds: Option<u64>,
    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Edge pruning threshold used on the recovered model.
    #[arg(long)]
    threshold: Option<f64>,
    /// Per-cell wall-clock budget, e.g. `90s`, `5m`; exceeded cells are
    /// recorded as timeouts and the run continues.
    #[arg(long)]
    time_budget: Option<String>,
}

#[derive(Args)]
pub struct ProfileArgs {
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated `NxT` sizes, e.g. `10x1000,20x1000,40x1000`.
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long)]
    tau: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Memory cap in GB; sizes whose estimated need exceeds it are recorded
    /// as memory_limit rows without running.
    #[arg(long)]
    mem_cap: Option<f64>,
}

#[derive(Args)]
pub struct FetchArgs {
    /// URL template with {ticker}, {start}, {end} placeholders.
    #[arg(long)]
    endpoint: Option<String>,
    /// Comma-separated ticker symbols.
    #[arg(long)]
    tickers: Option<String>,
    /// ISO start date.
    #[arg(long)]
    start: Option<String>,
    /// ISO end date.
    #[arg(long)]
    end: Option<String>,
    /// Merged panel CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cache directory for per-ticker responses.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let file = match &cli.config {
        Some(path) => match ConfigFile::load(path) {
            Ok(f) => f,
            Err(e) => {
                eprintln!("causeway: {e}");
                std::process::exit(e.exit_code());
            }
        },
        None => ConfigFile::default(),
    };

    let threads = match file.resolve_opt(cli.threads, "threads") {
        Ok(t) => t,
        Err(e) => {
            eprintln!("causeway: {e}");
            std::process::exit(e.exit_code());
        }
    };
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let outcome = match cli.command {
        Command::Discover(args) => commands::discover(args, &file),
        Command::Backtest(args) => commands::backtest(args, &file),
        Command::SynthBench(args) => commands::synth_bench(args, &file),
        Command::Profile(args) => commands::profile(args, &file),
        Command::Fetch(args) => commands::fetch(args, &file),
    };
    if let Err(e) = outcome {
        eprintln!("causeway: {e}");
        std::process::exit(e.exit_code());
    }
}
