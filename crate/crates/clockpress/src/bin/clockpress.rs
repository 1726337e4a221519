use std::process::ExitCode;

use clap::Parser;

use clockpress::cli::{execute, parse_config, Flags, Preset};
use clockpress::Error;

/// Exact simulator of qubit-clock compression protocols.
#[derive(Parser)]
#[command(name = "clockpress", version)]
struct Cli {
    /// Preset: error-scan, memory-scan, bound-compare, converse,
    /// oracle-verify, or projection-basis-diagnostic.
    preset: String,

    /// Flat key=value config file; flags override its keys.
    #[arg(long)]
    config: Option<std::path::PathBuf>,

    /// Copy counts, comma-separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<u32>>,

    /// Spectrum values p in (1/2, 1], comma-separated.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,

    /// Superposition weights s in (0, 1), comma-separated.
    #[arg(long, value_delimiter = ',')]
    s: Option<Vec<f64>>,

    /// Partition exponent (converse: window width exponent w).
    #[arg(long)]
    x: Option<f64>,

    /// known or unknown spectrum.
    #[arg(long)]
    mode: Option<String>,

    /// Evolution-time grid override, comma-separated, in [0, 2pi).
    #[arg(long, value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,

    /// Seed for the oracle-verify random inputs.
    #[arg(long)]
    seed: Option<u64>,

    /// Output CSV path ('-' for stdout).
    #[arg(long)]
    out: Option<String>,

    /// true forces the large-n tail restriction, false disables it;
    /// default switches it on above n = 512.
    #[arg(long)]
    restrict_tail: Option<bool>,

    /// Worker threads for the sweep (default: one per core).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let usage_only = matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = err.print();
            return if usage_only {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("clockpress: {err}");
            ExitCode::from(match err {
                Error::SizeRefusal(_) => 2,
                Error::Numeric(_) => 3,
                _ => 1,
            })
        }
    }
}

fn run(cli: Cli) -> clockpress::Result<()> {
    let preset: Preset = cli.preset.parse()?;
    let file_text = match &cli.config {
        Some(path) => Some(std::fs::read_to_string(path)?),
        None => None,
    };
    let flags = Flags {
        n: cli.n,
        p: cli.p,
        s: cli.s,
        x: cli.x,
        mode: cli.mode,
        t_grid: cli.t_grid,
        seed: cli.seed,
        out: cli.out,
        restrict_tail: cli.restrict_tail,
    };
    let config = parse_config(Some(preset), file_text.as_deref(), &flags)?;
    let threads = cli.threads.unwrap_or(0);
    if config.output_path == "-" {
        execute(&config, threads, &mut std::io::stdout().lock())
    } else {
        let file = std::fs::File::create(&config.output_path)?;
        execute(&config, threads, &mut std::io::BufWriter::new(file))
    }
}
