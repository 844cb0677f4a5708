//! Command-line front end. The `frameless` binary only forwards to
//! [`main`].

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::capture::{default_t_max, CaptureTable, DEFAULT_TABLE_SAMPLES};
use crate::density_evolution::{curve_maximum, iterate_to_fixed_point, throughput_curve, DeConfig};
use crate::error::{Error, Result};
use crate::io::{self, CacheStatus, TableCache, TableKey};
use crate::model::{SnrMode, SystemParams};
use crate::simulator::{run_batch, BatchSummary, Receiver, Reception};
use crate::sweep::{grid_search, GridSpec, SweepConfig};

#[derive(Debug, Parser)]
#[command(
    name = "frameless",
    version,
    about = "Frameless ALOHA with capture and SIC: and-or tree solver and simulator"
)]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides every base seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory for CSV and JSON files.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Step 0.01 grids and 10 000 runs per point.
    #[arg(long, global = true)]
    pub full_scale: bool,
    /// Print the CSV column documentation and exit.
    #[arg(long)]
    pub schema: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build (or fetch from cache) a capture probability table.
    PiTable(TableArgs),
    /// Solve the and-or tree fixed point at one (beta, M/N).
    De(DeArgs),
    /// Optimize beta over a grid of M/N values.
    DeSweep(DeSweepArgs),
    /// Simulate a batch of contention periods at one (beta, V, S).
    Sim(SimArgs),
    /// Grid search over (beta, V, S).
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TableArgs {
    /// Capture ratio b.
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    /// b / mean SNR.
    #[arg(long, default_value_t = 0.1)]
    pub snr_ratio: f64,
    /// Largest interferer count; defaults to what beta <= --beta-max needs.
    #[arg(long)]
    pub t_max: Option<usize>,
    #[arg(long, default_value_t = 10.0)]
    pub beta_max: f64,
    #[arg(long, default_value_t = DEFAULT_TABLE_SAMPLES)]
    pub samples: u64,
    /// Cache directory; defaults to $FRAMELESS_CACHE_DIR or .frameless-cache.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Fail instead of building a missing table.
    #[arg(long)]
    pub no_build: bool,
    /// Use the collision channel (no capture, no noise).
    #[arg(long)]
    pub no_capture: bool,
}

#[derive(Debug, Args)]
pub struct DeArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[arg(long)]
    pub beta: f64,
    /// Slots per user, M/N.
    #[arg(long)]
    pub mn: f64,
}

#[derive(Debug, Args)]
pub struct DeSweepArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[arg(long, default_value_t = 0.05)]
    pub mn_min: f64,
    #[arg(long, default_value_t = 3.0)]
    pub mn_max: f64,
    #[arg(long, default_value_t = 0.01)]
    pub mn_step: f64,
    #[arg(long, default_value_t = 0.5)]
    pub beta_min: f64,
    #[arg(long, default_value_t = 0.05)]
    pub beta_step: f64,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// JSON file holding a SimConfig; replaces the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long, default_value_t = 0.1)]
    pub snr_ratio: f64,
    #[arg(long, default_value_t = 6.14)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.7)]
    pub v: f64,
    #[arg(long, default_value_t = 2.02)]
    pub s: f64,
    #[arg(long, default_value_t = 1000)]
    pub runs: usize,
    #[arg(long)]
    pub no_capture: bool,
    /// Redraw the SNR for every transmission.
    #[arg(long)]
    pub per_transmission: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// JSON file holding a SweepConfig; replaces the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long, default_value_t = 0.1)]
    pub snr_ratio: f64,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub no_capture: bool,
    /// Second pass around the coarse optimum with a finer step.
    #[arg(long)]
    pub refine: bool,
}

/// Batch simulation input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub params: SystemParams,
    pub runs: usize,
    #[serde(default)]
    pub reception: Reception,
}

#[derive(Debug, Serialize)]
struct TableReport<'a> {
    path: Option<PathBuf>,
    status: Option<CacheStatus>,
    table: &'a CaptureTable,
}

#[derive(Debug, Serialize)]
struct DeReport {
    capture_ratio: Option<f64>,
    snr_ratio: Option<f64>,
    beta: f64,
    slots_per_user: f64,
    epsilon: f64,
    p_r: f64,
    throughput: f64,
    iterations: usize,
    converged: bool,
}

/// Overall optimum of an M/N sweep.
#[derive(Debug, Serialize)]
struct CurveOptimum {
    capture_ratio: Option<f64>,
    snr_ratio: Option<f64>,
    throughput_max: f64,
    p_r: f64,
    beta: f64,
    slots_per_user: f64,
    converged: bool,
}

#[derive(Debug, Serialize)]
struct SimSummary {
    config: SimConfig,
    summary: BatchSummary,
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".frameless-write-probe");
    std::fs::write(&probe, b"").map_err(|e| Error::io(dir, e))?;
    std::fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn load_table(args: &TableArgs, seed: Option<u64>) -> Result<(CaptureTable, Option<PathBuf>, Option<CacheStatus>)> {
    let t_max = args.t_max.unwrap_or_else(|| default_t_max(args.beta_max.max(1.0)));
    if args.no_capture {
        return Ok((CaptureTable::no_capture(t_max), None, None));
    }
    let key = TableKey {
        capture_ratio: args.b,
        snr_ratio: args.snr_ratio,
        t_max,
        samples: args.samples,
        seed: seed.unwrap_or(0),
    };
    let cache = args
        .cache_dir
        .as_ref()
        .map_or_else(TableCache::from_env, TableCache::new);
    let (table, status) = cache.load_or_build(&key, !args.no_build)?;
    Ok((table, Some(cache.path_for(&key)), Some(status)))
}

fn channel_fields(table: &CaptureTable) -> (Option<f64>, Option<f64>) {
    (
        table.channel.map(|c| c.capture_ratio),
        table.channel.map(|c| c.snr_ratio()),
    )
}

fn cmd_pi_table(cli: &Cli, args: &TableArgs) -> Result<()> {
    let (table, path, status) = load_table(args, cli.seed)?;
    print_json(&TableReport {
        path,
        status,
        table: &table,
    })
}

fn cmd_de(cli: &Cli, args: &DeArgs) -> Result<()> {
    let mut table_args = args.table.clone();
    table_args.beta_max = table_args.beta_max.max(args.beta);
    let (table, _, _) = load_table(&table_args, cli.seed)?;
    let outcome = iterate_to_fixed_point(&DeConfig::from_load(args.beta, args.mn, &table)?);
    let (capture_ratio, snr_ratio) = channel_fields(&table);
    let report = DeReport {
        capture_ratio,
        snr_ratio,
        beta: args.beta,
        slots_per_user: args.mn,
        epsilon: args.mn - 1.0,
        p_r: outcome.p_r,
        throughput: outcome.throughput,
        iterations: outcome.state.iteration,
        converged: outcome.state.converged,
    };
    ensure_out_dir(&cli.out)?;
    io::write_json(&cli.out.join("de.json"), &report)?;
    print_json(&report)
}

fn cmd_de_sweep(cli: &Cli, args: &DeSweepArgs) -> Result<()> {
    let loads = GridSpec::new(args.mn_min, args.mn_max, args.mn_step);
    let betas = GridSpec::new(args.beta_min, args.table.beta_max, args.beta_step);
    loads.validate("mn")?;
    betas.validate("beta")?;
    let (table, _, _) = load_table(&args.table, cli.seed)?;
    ensure_out_dir(&cli.out)?;
    let curve = throughput_curve(&table, &loads.values(), &betas.values())?;
    io::with_file(&cli.out.join("de_sweep.csv"), |w| io::write_curve_csv(w, &curve))?;
    let best = curve_maximum(&curve).expect("non-empty grid");
    let (capture_ratio, snr_ratio) = channel_fields(&table);
    let optimum = CurveOptimum {
        capture_ratio,
        snr_ratio,
        throughput_max: best.throughput,
        p_r: best.p_r,
        beta: best.beta,
        slots_per_user: best.slots_per_user,
        converged: best.converged,
    };
    io::write_json(&cli.out.join("de_sweep_best.json"), &optimum)?;
    print_json(&optimum)
}

fn cmd_sim(cli: &Cli, args: &SimArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => io::read_json::<SimConfig>(path)?,
        None => SimConfig {
            params: SystemParams::new(args.n, args.beta, args.b, args.snr_ratio, args.v, args.s)?.with_snr_mode(
                if args.per_transmission {
                    SnrMode::PerTransmission
                } else {
                    SnrMode::PerUserFixed
                },
            ),
            runs: args.runs,
            reception: if args.no_capture {
                Reception::Collision
            } else {
                Reception::Capture
            },
        },
    };
    if let Some(seed) = cli.seed {
        config.params.base_seed = seed;
    }
    if cli.full_scale {
        config.runs = 10_000;
    }
    config.params.validate()?;
    let receiver = Receiver::from_params(&config.params, config.reception)?;
    ensure_out_dir(&cli.out)?;
    let records = run_batch(&config.params, &receiver, config.runs)?;
    io::with_file(&cli.out.join("sim_runs.csv"), |w| io::write_runs_csv(w, &records))?;
    let summary = SimSummary {
        summary: BatchSummary::from_records(&records),
        config,
    };
    io::write_json(&cli.out.join("sim_summary.json"), &summary)?;
    print_json(&summary)
}

fn cmd_sweep(cli: &Cli, args: &SweepArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => io::read_json::<SweepConfig>(path)?,
        None => {
            let params = SystemParams::new(args.n, 1.0, args.b, args.snr_ratio, 1.0, 0.0)?;
            let reception = if args.no_capture {
                Reception::Collision
            } else {
                Reception::Capture
            };
            let mut c = SweepConfig::desk_scale(params, reception);
            c.refine = args.refine;
            if let Some(runs) = args.runs {
                c.runs_per_point = runs;
            }
            c
        }
    };
    if let Some(seed) = cli.seed {
        config.params.base_seed = seed;
    }
    if cli.full_scale {
        config = config.full_scale();
    }
    config.keep_grid = true;
    ensure_out_dir(&cli.out)?;
    let mut result = grid_search(&config)?;
    let grid = result.grid.take().unwrap_or_default();
    io::with_file(&cli.out.join("sweep_grid.csv"), |w| io::write_grid_csv(w, &grid))?;
    io::write_json(&cli.out.join("sweep_best.json"), &result)?;
    print_json(&result)
}

/// Executes a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    if cli.schema {
        print!("{}", io::csv_schema());
        return Ok(());
    }
    match &cli.command {
        Some(Command::PiTable(a)) => cmd_pi_table(cli, a),
        Some(Command::De(a)) => cmd_de(cli, a),
        Some(Command::DeSweep(a)) => cmd_de_sweep(cli, a),
        Some(Command::Sim(a)) => cmd_sim(cli, a),
        Some(Command::Sweep(a)) => cmd_sweep(cli, a),
        None => Err(Error::invalid("command", "a subcommand is required (see --help)")),
    }
}

/// Parses `std::env::args` and runs. Exit status 2 for usage and config
/// errors, 1 for runtime failures.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidParameter { .. } | Error::Json(_) | Error::CacheMiss(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
