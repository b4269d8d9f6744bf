use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use stocknet::causality::{GrangerConfig, LagCriterion};
use stocknet::ingest::{
    aggregate_by_manager, parse_end_of_day, parse_holdings, parse_labels, parse_market_caps, parse_minute_bars,
    AggregatedHolding, CloseBook, HoldingsSchema, MinuteBarSeries, SessionCalendar,
};
use stocknet::network::{build_bipartite, load_network};
use stocknet::pipeline::{self, derive_seed, StageStatus, DEFAULT_CRASH_DATES};
use stocknet::Error;

#[derive(Parser)]
#[command(name = "stocknet", version, about = "Ownership networks of stocks and crash-day analysis")]
struct Cli {
    /// Log filter, e.g. `info` or `stocknet=debug`.
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a run configuration and list findings.
    Validate { config: PathBuf },
    /// Run the configured stages, reusing cached outputs.
    Run {
        config: PathBuf,
        /// Overrides the `workers` key.
        #[arg(long)]
        workers: Option<usize>,
        /// Assemble the report bundle after the run.
        #[arg(long)]
        report: bool,
    },
    /// Assemble the report bundle of a finished run.
    Report { output_dir: PathBuf },
    /// Network construction.
    #[command(subcommand)]
    Network(NetworkCommand),
    /// Topology tables for a saved network.
    Metrics(MetricsArgs),
    /// Institution herding tables for a saved network.
    Herding(HerdingArgs),
    /// Crash-day group means and hub scatter with null experiments.
    Timeseries(TimeseriesArgs),
    /// Pairwise Granger tests.
    #[command(subcommand)]
    Causality(CausalityCommand),
    /// Write a synthetic market that exercises every stage.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20150626)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum NetworkCommand {
    /// Project holdings on one date and filter by weight quantile.
    Build {
        #[arg(long)]
        holdings: PathBuf,
        #[arg(long)]
        date: NaiveDate,
        #[arg(long, default_value_t = 0.95)]
        k: f64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the filter sweep CSV here.
        #[arg(long)]
        sweep: Option<PathBuf>,
    },
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    market_caps: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = (1..=30).collect::<Vec<usize>>())]
    rich_club_r: Vec<usize>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct HerdingArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    holdings: PathBuf,
    /// Holdings snapshot date.
    #[arg(long)]
    date: NaiveDate,
    #[arg(long)]
    eod: PathBuf,
    #[arg(long, value_delimiter = ',', default_values = DEFAULT_CRASH_DATES)]
    dates: Vec<NaiveDate>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BarsArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    bars: PathBuf,
    #[arg(long)]
    eod: PathBuf,
    #[arg(long, default_value = "09:30-11:30,13:00-15:00")]
    sessions: String,
    #[arg(long)]
    out_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct TimeseriesArgs {
    #[command(flatten)]
    io: BarsArgs,
    #[arg(long, default_value_t = 10)]
    window_minutes: usize,
    #[arg(long, default_value_t = 5)]
    top_n: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_values = DEFAULT_CRASH_DATES)]
    dates: Vec<NaiveDate>,
}

#[derive(Subcommand)]
enum CausalityCommand {
    /// Test every network edge on one date plus the all-pairs average level.
    Run(CausalityArgs),
}

#[derive(Args)]
struct CausalityArgs {
    #[arg(long)]
    date: NaiveDate,
    /// Saved network whose edges are tested.
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    bars: PathBuf,
    #[arg(long)]
    eod: PathBuf,
    #[arg(long, default_value = "09:30-11:30,13:00-15:00")]
    sessions: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 10)]
    max_lag: usize,
    #[arg(long, default_value_t = 1)]
    dmax: usize,
    #[arg(long, default_value = "BIC")]
    criterion: LagCriterion,
    #[arg(long, default_value_t = 60)]
    min_valid_points: usize,
    #[arg(long, default_value_t = 5)]
    top_n: usize,
    /// Sampled pairs for the average level.
    #[arg(long, default_value_t = 100_000)]
    average_sample: usize,
    /// Enumerate every ordered pair for the average level.
    #[arg(long)]
    average_full: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = (1..=30).collect::<Vec<usize>>())]
    rich_club_r: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

fn create_dir(dir: &Path) -> stocknet::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::InvalidArgument(format!("{}: {e}", dir.display())))
}

fn snapshot_holdings(path: &Path, date: NaiveDate) -> stocknet::Result<Vec<AggregatedHolding>> {
    let parsed = parse_holdings(path, &HoldingsSchema::default())?;
    if parsed.rejected() > 0 {
        eprintln!("holdings: {} rows rejected", parsed.rejected());
    }
    let on_date: Vec<_> = parsed.records.into_iter().filter(|r| r.as_of_date == date).collect();
    if on_date.is_empty() {
        return Err(Error::Degenerate(format!("no holdings dated {date}")));
    }
    Ok(aggregate_by_manager(&on_date))
}

fn load_days(
    bars: &Path,
    eod: &Path,
    sessions: &SessionCalendar,
    dates: &[NaiveDate],
) -> stocknet::Result<BTreeMap<NaiveDate, Vec<MinuteBarSeries>>> {
    let book = CloseBook::new(&parse_end_of_day(eod)?.records);
    let parsed = parse_minute_bars(bars, &book, sessions)?;
    let mut days: BTreeMap<NaiveDate, Vec<_>> = BTreeMap::new();
    for s in parsed.series.into_iter().filter(|s| dates.contains(&s.trade_date)) {
        days.entry(s.trade_date).or_default().push(s);
    }
    Ok(days)
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> stocknet::Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(pool.install(f))
}

fn validate(config: &Path) -> stocknet::Result<ExitCode> {
    let v = pipeline::load_config(config)?;
    for f in &v.findings {
        println!("{f}");
    }
    let errors = v.errors().count();
    println!("{} error(s), {} warning(s)", errors, v.warnings().count());
    Ok(if errors > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn run(config: &Path, workers: Option<usize>, report: bool) -> stocknet::Result<ExitCode> {
    let v = pipeline::load_config(config)?;
    for f in &v.findings {
        eprintln!("{f}");
    }
    if !v.is_ok() {
        return Ok(ExitCode::from(2));
    }
    let mut cfg = v.into_config()?;
    if let Some(w) = workers {
        cfg.workers = w;
    }
    let manifest = pipeline::run(&cfg)?;
    for r in &manifest.stages {
        let status = match r.status {
            StageStatus::Completed => "completed",
            StageStatus::Cached => "cached",
            StageStatus::NotRequested => "not requested",
            StageStatus::Failed => "failed",
        };
        println!("{:<11} {status:<13} {:.2}s", r.stage.name(), r.seconds);
    }
    if report {
        let index = pipeline::report(&cfg.output_dir)?;
        println!("report: {} files, {} omitted", index.files.len(), index.omitted.len());
    }
    Ok(ExitCode::SUCCESS)
}

fn execute(cli: Cli) -> stocknet::Result<ExitCode> {
    match cli.command {
        Command::Validate { config } => return validate(&config),
        Command::Run {
            config,
            workers,
            report,
        } => return run(&config, workers, report),
        Command::Report { output_dir } => {
            let index = pipeline::report(&output_dir)?;
            for f in &index.files {
                println!("{}", f.name);
            }
            for o in &index.omitted {
                println!("omitted {}: {}", o.name, o.reason);
            }
        }
        Command::Network(NetworkCommand::Build {
            holdings,
            date,
            k,
            out,
            sweep,
        }) => {
            let b = build_bipartite(&snapshot_holdings(&holdings, date)?)?;
            let full = stocknet::network::project(&b);
            if let Some(path) = sweep {
                let ks = (0..20).map(|i| i as f64 * 0.05).chain([0.99]).collect::<Vec<_>>();
                let points = stocknet::network::filter_sweep(&full, &ks)?;
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(["k", "threshold_cents", "ws_ratio", "lwcc_size", "edge_count"])?;
                for p in points {
                    w.write_record([
                        p.k.to_string(),
                        p.threshold.0.to_string(),
                        p.ws_ratio.to_string(),
                        p.lwcc_size.to_string(),
                        p.edge_count.to_string(),
                    ])?;
                }
                w.flush().map_err(|e| Error::InvalidArgument(e.to_string()))?;
            }
            let net = stocknet::network::filter_edges(&full, k)?;
            stocknet::network::save_network(&net, &out)?;
            println!(
                "{} nodes, {} of {} edges kept at k={k}",
                net.node_count(),
                net.edge_count(),
                full.edge_count()
            );
        }
        Command::Metrics(a) => {
            create_dir(&a.out_dir)?;
            let net = load_network(&a.network)?;
            let labels = parse_labels(&a.labels)?.records;
            let caps = match &a.market_caps {
                Some(p) => Some(
                    parse_market_caps(p)?
                        .records
                        .into_iter()
                        .map(|c| (c.stock_id, c.market_value))
                        .collect(),
                ),
                None => None,
            };
            pipeline::metrics_stage(&net, &labels, caps.as_ref(), &a.rich_club_r, &a.out_dir)?;
        }
        Command::Herding(a) => {
            create_dir(&a.out_dir)?;
            let net = load_network(&a.network)?;
            let b = build_bipartite(&snapshot_holdings(&a.holdings, a.date)?)?;
            let book = CloseBook::new(&parse_end_of_day(&a.eod)?.records);
            pipeline::herding_stage(&b, &net, &book, &a.dates, &a.out_dir)?;
        }
        Command::Timeseries(a) => {
            create_dir(&a.io.out_dir)?;
            let net = load_network(&a.io.network)?;
            let calendar = SessionCalendar::parse(&a.io.sessions)?;
            let days = load_days(&a.io.bars, &a.io.eod, &calendar, &a.dates)?;
            let opts = pipeline::TimeseriesOptions {
                window_minutes: a.window_minutes,
                top_n: a.top_n,
                trials: a.trials,
                calendar,
            };
            let seed = a.seed;
            let seed_for = |d: NaiveDate, exp: &str| derive_seed(seed, &[&d.to_string(), exp]);
            let summary = with_pool(a.io.workers, || {
                pipeline::timeseries_stage(&net, &days, &a.dates, &opts, &seed_for, &a.io.out_dir)
            })??;
            for d in summary {
                println!(
                    "{}: {}/{} points below diagonal, null gaps: random edges {:?}, shuffled nodes {:?}",
                    d.date, d.points_below_diagonal, d.points, d.random_edges.mean_gap, d.shuffled_nodes.mean_gap
                );
            }
        }
        Command::Causality(CausalityCommand::Run(a)) => {
            create_dir(&a.out_dir)?;
            let cfg = GrangerConfig {
                alpha: a.alpha,
                max_lag: a.max_lag,
                lag_criterion: a.criterion,
                d_max: a.dmax,
                min_valid_points: a.min_valid_points,
                ..GrangerConfig::default()
            };
            cfg.validate()?;
            let net = load_network(&a.edges)?;
            let calendar = SessionCalendar::parse(&a.sessions)?;
            let days = load_days(&a.bars, &a.eod, &calendar, &[a.date])?;
            if !days.contains_key(&a.date) {
                return Err(Error::EmptyInput("no minute bars on the requested date"));
            }
            let opts = pipeline::CausalityOptions {
                top_n: a.top_n,
                sample_size: a.average_sample,
                full_enumeration: a.average_full,
                workers: a.workers,
            };
            let seed = a.seed;
            let seed_for = |d: NaiveDate| derive_seed(seed, &[&d.to_string(), "average_level"]);
            let summaries = pipeline::causality_stage(
                &net,
                &days,
                &[a.date],
                &cfg,
                &opts,
                &a.rich_club_r,
                &seed_for,
                &a.out_dir,
            )?;
            for s in summaries {
                let avg = s.average_level.as_ref().and_then(|x| x.ratio);
                println!(
                    "{}: {} edges, {} tested, {} skipped; average level {:?}",
                    s.date, s.edges, s.tested, s.skipped, avg
                );
            }
        }
        Command::Synth { out, seed } => {
            let spec = stocknet::synthetic::MarketSpec {
                seed,
                ..Default::default()
            };
            let files = stocknet::synthetic::generate(&spec)?.write(&out)?;
            println!("{}", files.holdings.parent().unwrap_or(&out).display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_new(&cli.log).unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
