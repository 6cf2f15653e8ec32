mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::Kind;
use crate::config::{one_line, parse_config, Format};

/// Thin-domain homogenization experiments.
#[derive(Parser, Debug)]
#[command(name = "thinfem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the rescaled 2D problem at `study.epsilon`.
    Solve2d(Common),
    /// Solve the 1D limit problem.
    Solve1d(Common),
    /// Tabulate the limit coefficients.
    Homogenize(Common),
    /// Boundary-layer decay and energy of the cell solution.
    Cell(Common),
    /// First mixed eigenvalue of the reference cell.
    Eigen(Common),
    /// Epsilon sweep against the limit solution.
    Converge(Common),
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `output.format`.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum FormatArg {
    Csv,
    Gnuplot,
}

/// Exit status for configuration problems; computation failures use 1.
const EXIT_CONFIG: u8 = 2;

fn fail(code: u8, msg: &str) -> ExitCode {
    eprintln!("error: {}", one_line(msg));
    ExitCode::from(code)
}

fn set_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("THINFEM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("config: THINFEM_THREADS must be a positive integer, got \"{v}\""))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("config: {e}"))
}

fn main() -> ExitCode {
    let (kind, common) = match Cli::parse().command {
        Command::Solve2d(c) => (Kind::Solve2d, c),
        Command::Solve1d(c) => (Kind::Solve1d, c),
        Command::Homogenize(c) => (Kind::Homogenize, c),
        Command::Cell(c) => (Kind::Cell, c),
        Command::Eigen(c) => (Kind::Eigen, c),
        Command::Converge(c) => (Kind::Converge, c),
    };
    if let Err(e) = set_threads() {
        return fail(EXIT_CONFIG, &e);
    }
    let text = match std::fs::read_to_string(&common.config) {
        Ok(t) => t,
        Err(e) => {
            return fail(
                EXIT_CONFIG,
                &format!("config: cannot read {}: {e}", common.config.display()),
            )
        }
    };
    let mut run = match parse_config(&text) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_CONFIG, &format!("config: {e}")),
    };
    if let Some(out) = &common.out {
        run.config.output.directory = out.to_string_lossy().into_owned();
    }
    if let Some(f) = common.format {
        run.config.output.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Gnuplot => Format::Gnuplot,
        };
    }
    match commands::dispatch(kind, &run) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(1, &e.to_string()),
    }
}
