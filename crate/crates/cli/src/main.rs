use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

use commands::Run;
use config::{Config, ConfigError};
use output::{config_hash, Artifacts};

#[derive(Parser)]
#[command(name = "slowrec", version, about = "Recurrence and escape-rate experiments for interval maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check expansion, exponents and constants of a map.
    ValidateMap(Common),
    /// Thresholds and the level-0 partition.
    BuildPartition(Common),
    /// Refine the partition and report per-level checks.
    Refine(Common),
    RecurrenceRate(Common),
    /// Survivor measures of the doubling-type holes.
    EscapeRate(Common),
    /// Ulam densities.
    Acim(Common),
    Correlation(Common),
    SemiflowDeviation(Common),
    SemiflowEscape(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory; overrides `run.output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo sample count; overrides the config.
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long, env = "SLOWREC_WORKERS")]
    workers: Option<usize>,
}

pub enum CliError {
    Config(ConfigError),
    Numeric(slowrec::Error),
    Io(std::io::Error),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<slowrec::Error> for CliError {
    fn from(e: slowrec::Error) -> Self {
        CliError::Numeric(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

type Handler = fn(&Run, &slowrec::map::PiecewiseMap, &mut Artifacts) -> Result<(), CliError>;

fn execute(handler: Handler, args: Common) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = Config::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.run.seed = s;
    }
    if let Some(w) = args.workers {
        cfg.run.workers = Some(w);
    }
    if cfg.run.workers == Some(0) {
        return Err(ConfigError("workers must be positive".into()).into());
    }
    let map = cfg.build_map()?;
    let dir = args.out.clone().unwrap_or_else(|| cfg.run.output_dir.clone());
    let seed = cfg.run.seed;
    let workers = cfg.run.workers.unwrap_or(1);
    let mut hashed = cfg.clone();
    hashed.run.workers = None;
    let mut canonical = hashed.canonical();
    if let Some(n) = args.samples {
        canonical += &format!("\n# samples override = {n}\n");
    }
    let mut out = Artifacts::new(&dir, &config_hash(&canonical), seed)?;
    let run = Run { cfg, seed, samples: args.samples };
    eprintln!("running with {workers} worker(s), seed {seed}");
    slowrec::stats::with_workers(workers, || handler(&run, &map, &mut out))?;
    Ok(out.commit()?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (handler, args): (Handler, Common) = match cli.command {
        Command::ValidateMap(a) => (commands::validate, a),
        Command::BuildPartition(a) => (commands::build_partition, a),
        Command::Refine(a) => (commands::refine, a),
        Command::RecurrenceRate(a) => (commands::recurrence_rate, a),
        Command::EscapeRate(a) => (commands::escape_rate, a),
        Command::Acim(a) => (commands::acim, a),
        Command::Correlation(a) => (commands::correlation, a),
        Command::SemiflowDeviation(a) => (commands::semiflow_deviation, a),
        Command::SemiflowEscape(a) => (commands::semiflow_escape, a),
    };
    match execute(handler, args) {
        Ok(files) => {
            for f in files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(CliError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(CliError::Numeric(e @ slowrec::Error::InvalidParameters(_))) => {
            eprintln!("config error: {}: {e}", e.name());
            ExitCode::from(2)
        }
        Err(CliError::Numeric(e)) if e.is_budget() => {
            eprintln!("budget exceeded: {}: {e}", e.name());
            ExitCode::from(4)
        }
        Err(CliError::Numeric(e)) => {
            eprintln!("numeric failure: {}: {e}", e.name());
            ExitCode::from(3)
        }
        Err(CliError::Io(e)) => {
            eprintln!("i/o error: {e}");
            ExitCode::from(3)
        }
    }
}
