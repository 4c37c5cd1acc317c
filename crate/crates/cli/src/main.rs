use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use fastrack_cli::run;

/// Tracking error bounds: offline precomputation and online safe replanning.
#[derive(Parser)]
#[command(name = "fastrack", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the HJ variational inequality per the config and persist the
    /// value function(s).
    Precompute {
        #[arg(long)]
        config: PathBuf,
        /// Output path stem; decomposed models write one file per block.
        #[arg(long, default_value = "value.ftvf")]
        out: PathBuf,
    },
    /// Print a value-function file's metadata and per-snapshot extents.
    Info { file: PathBuf },
    /// Run the online loop against precomputed value function(s).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Export tables from value functions or logs.
    #[command(subcommand)]
    Export(ExportCommand),
}

#[derive(Subcommand)]
enum ExportCommand {
    /// 2D slice of the final value snapshot at fixed remaining coordinates.
    Slice {
        file: PathBuf,
        /// The two free dimensions, e.g. --dims 0,1
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        /// Fixed coordinates as dim=value pairs, e.g. --at 2=1.5708 --at 3=0.1
        #[arg(long = "at")]
        fixed: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extent-vs-lookahead table.
    Extents {
        file: PathBuf,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summary JSON recomputed from a CSV log.
    Log {
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Precompute { config, out } => run::cmd_precompute(&config, &out),
        Command::Info { file } => run::cmd_info(&file),
        Command::Simulate { config, out } => run::cmd_simulate(&config, &out),
        Command::Export(cmd) => match cmd {
            ExportCommand::Slice {
                file,
                dims,
                fixed,
                out,
            } => {
                if dims.len() != 2 {
                    anyhow::bail!("--dims needs exactly two dimensions");
                }
                let fixed = fixed
                    .iter()
                    .map(|s| {
                        let (d, v) = s
                            .split_once('=')
                            .ok_or_else(|| anyhow::anyhow!("--at expects dim=value, got `{s}`"))?;
                        Ok((d.trim().parse::<usize>()?, v.trim().parse::<f64>()?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                run::cmd_export_slice(&file, (dims[0], dims[1]), &fixed, &out)
            }
            ExportCommand::Extents { file, eps, out } => run::cmd_export_extents(&file, eps, &out),
            ExportCommand::Log { csv, out } => run::cmd_export_log(&csv, &out),
        },
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("FASTRACK_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            fastrack::configure_threads(n);
        }
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
