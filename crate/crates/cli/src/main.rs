mod commands;
mod error;
mod rundir;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{GoatArgs, GoatMode};
use error::CliError;

#[derive(Parser)]
#[command(name = "winding-wavemap", version, about = "Reduced wave maps into a warped torus-sphere target")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a run configuration and write its run directory.
    Simulate {
        /// RunConfig JSON.
        config: PathBuf,
        /// Parent of the run directory.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Run directory name; defaults to the config file stem.
        #[arg(long)]
        name: Option<String>,
    },
    /// Recompute diagnostics from a run directory's snapshots and cross-check
    /// them against its series.
    Analyze { run_dir: PathBuf },
    /// Invariant checks of the target geometry.
    GeometryCheck {
        /// ManifoldConfig JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Ground-state energy, energy gap and stationarity-defect signs.
    HmCheck {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Planar gradient or Newtonian flow of the goat-tracks potential.
    GoatTracks {
        #[arg(long, value_enum, default_value = "gradient")]
        mode: GoatMode,
        #[arg(long, value_parser = parse_point, default_value = "1.2,0")]
        x0: [f64; 2],
        #[arg(long, value_parser = parse_point, default_value = "0,0.05")]
        v0: [f64; 2],
        #[arg(long, default_value_t = 1e4)]
        t_end: f64,
        /// Step of the Newtonian flow.
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Record every this many Newtonian steps.
        #[arg(long, default_value_t = 100)]
        record_every: usize,
        #[arg(long, default_value = "runs/goat-tracks")]
        out: PathBuf,
    },
    /// Run every point of a parameter grid concurrently.
    Sweep {
        /// JSON with a `base` RunConfig and a `vary` map of dotted paths to values.
        grid: PathBuf,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Sweep directory name; defaults to the grid file stem.
        #[arg(long)]
        name: Option<String>,
    },
}

fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected two comma-separated numbers, got {s:?}"));
    }
    let x = parts[0].trim().parse::<f64>().map_err(|e| e.to_string())?;
    let y = parts[1].trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok([x, y])
}

fn named_dir(out: PathBuf, name: Option<String>, source: &std::path::Path) -> Result<PathBuf, CliError> {
    let name = match name {
        Some(n) => n,
        None => source
            .file_stem()
            .and_then(|s| s.to_str())
            .map(str::to_string)
            .ok_or_else(|| CliError::Config(format!("cannot derive a run name from {}", source.display())))?,
    };
    Ok(out.join(name))
}

fn dispatch(cli: Cli) -> Result<serde_json::Value, CliError> {
    match cli.command {
        Command::Simulate { config, out, name } => {
            let dir = named_dir(out, name, &config)?;
            commands::simulate(&config, &dir)
        }
        Command::Analyze { run_dir } => commands::analyze(&run_dir),
        Command::GeometryCheck { config } => commands::geometry_check(config.as_deref()),
        Command::HmCheck { config } => commands::hm_check_cmd(config.as_deref()),
        Command::GoatTracks { mode, x0, v0, t_end, dt, record_every, out } => {
            commands::goat_tracks(&GoatArgs { mode, x0, v0, t_end, dt, record_every, out })
        }
        Command::Sweep { grid, out, name } => {
            let dir = named_dir(out, name, &grid)?;
            sweep::sweep(&grid, &dir)
        }
    }
}

fn print_json(v: &serde_json::Value) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(v).expect("json value serializes");
    // a closed pipe is not an error for a report
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(v) => {
            print_json(&v);
            ExitCode::SUCCESS
        }
        Err(CliError::CheckFailed(report)) => {
            print_json(&report);
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
