use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use offscreen_load::evaluation::render_report;
use offscreen_load::pipeline;
use offscreen_load::tracking::CameraWindow;
use offscreen_load::{Error, Result, RunConfig};
use tracing::Level;

/// Camera-censored tracking emulation and offscreen load prediction.
#[derive(Debug, Parser)]
#[command(name = "offscreen-load", version)]
struct Cli {
    /// JSON run configuration; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus (frames.csv, events.csv).
    Simulate {
        #[arg(long)]
        output: PathBuf,
    },
    /// Validate frames and events and write normalised copies.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Apply the camera and write the subtrack table.
    Censor {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Camera window as WIDTHxHEIGHT in metres.
        #[arg(long, value_parser = parse_window)]
        window: Option<CameraWindow>,
    },
    /// Observed, censored and full load metrics per player-game.
    Metrics {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Subtrack- and game-level feature tables.
    Features {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Fit every model on the training games.
    Fit {
        /// Directory holding the feature tables.
        #[arg(long)]
        input: PathBuf,
        /// Model directory to write.
        #[arg(long)]
        output: PathBuf,
    },
    /// Predict test-game load with fitted models.
    Predict {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Build the report from predictions and print the results tables.
    Report {
        /// Directory holding predictions.csv.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Features, fit, predict and report in one step.
    Evaluate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

fn parse_window(s: &str) -> std::result::Result<CameraWindow, String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got `{s}`"))?;
    let w: f64 = w.trim().parse().map_err(|e| format!("width: {e}"))?;
    let h: f64 = h.trim().parse().map_err(|e| format!("height: {e}"))?;
    CameraWindow::new(w, h).map_err(|e| e.to_string())
}

const EXIT_FAILURE: u8 = 1;
const EXIT_MISSING_FILE: u8 = 3;
const EXIT_SCHEMA: u8 = 4;
const EXIT_CONFIG: u8 = 5;
const EXIT_INVALID_DATA: u8 = 6;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::MissingFile(_) => EXIT_MISSING_FILE,
        Error::Schema { .. } => EXIT_SCHEMA,
        Error::Config(_) => EXIT_CONFIG,
        Error::Parse { .. }
        | Error::Gap { .. }
        | Error::Validation(_)
        | Error::ConflictingEvents { .. }
        | Error::NonFinite(_)
        | Error::Empty(_) => EXIT_INVALID_DATA,
        _ => EXIT_FAILURE,
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    let done = |what: &str, path: &Path| eprintln!("{what}: {}", path.display());
    match &cli.command {
        Command::Simulate { output } => {
            pipeline::simulate(&cfg, output)?;
            done("wrote corpus", output);
        }
        Command::Ingest { input, output } => {
            let s = pipeline::ingest(input, output)?;
            println!(
                "{} games, {} players, {} tracks, {} frames, {} events",
                s.games, s.players, s.tracks, s.frames, s.events
            );
        }
        Command::Censor {
            input,
            output,
            window,
        } => {
            if let Some(w) = window {
                cfg.window = *w;
            }
            let n = pipeline::censor(&cfg, input, output)?;
            println!("{n} censored subtracks");
        }
        Command::Metrics { input, output } => {
            pipeline::metrics(&cfg, input, output)?;
            done("wrote metrics", output);
        }
        Command::Features { input, output } => {
            let set = pipeline::features(&cfg, input, output)?;
            println!(
                "{} subtrack rows, {} game rows",
                set.subtrack.rows.len(),
                set.game.rows.len()
            );
        }
        Command::Fit { input, output } => {
            let manifest = pipeline::fit(&cfg, input, output)?;
            let failed: Vec<_> = manifest.entries.iter().filter(|e| e.error.is_some()).collect();
            for e in &failed {
                eprintln!(
                    "fit failed for {}: {}",
                    e.key.file_stem(),
                    e.error.as_deref().unwrap_or_default()
                );
            }
            println!(
                "{} models fitted, {} failed",
                manifest.entries.len() - failed.len(),
                failed.len()
            );
        }
        Command::Predict {
            input,
            models,
            output,
        } => {
            let n = pipeline::predict(input, models, output)?;
            println!("{n} predictions");
        }
        Command::Report {
            input,
            models,
            output,
        } => {
            let report = pipeline::report(&cfg, input, models, output)?;
            print!("{}", render_report(&report));
        }
        Command::Evaluate { input, output } => {
            let report = pipeline::evaluate(&cfg, input, output)?;
            print!("{}", render_report(&report));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(if cli.verbose { Level::INFO } else { Level::WARN })
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
