use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gapstrip::commands::{cmd_cell_constants, cmd_dispersion, cmd_gaps, cmd_limit, cmd_verify, Outcome};
use gapstrip::config::{self, RunConfig};
use gapstrip::error::CliError;

#[derive(Parser)]
#[command(
    name = "gapstrip",
    version,
    about = "Bands and gaps of the Neumann Laplacian on a strip with a periodic string of small holes",
    after_long_help = concat!(
        "Exit codes: 0 success, 2 configuration error, 3 mesh/solver error, 4 failed verification.\n\n",
        "Configuration keys and defaults:\n\n",
    )
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML run configuration; every key is optional.
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set geometry.n=16`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Unperturbed dispersion curves and the classified crossing nodes.
    Limit(Common),
    /// Boundary-layer constants m1, m2, M of the hole.
    CellConstants(Common),
    /// Eigenvalue sweep over eta with node refinement windows.
    Dispersion(Common),
    /// Sweep, bands, gaps, cell constants and the asymptotic comparison.
    Gaps(Common),
    /// Run the acceptance suite.
    Verify(Common),
}

fn load(c: &Common) -> Result<RunConfig, CliError> {
    let text = match &c.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    config::load(&text, &c.set)
}

fn run(cli: Cli) -> Result<(Outcome, bool), CliError> {
    match cli.command {
        Command::Limit(c) => cmd_limit(&load(&c)?).map(|o| (o, true)),
        Command::CellConstants(c) => cmd_cell_constants(&load(&c)?).map(|o| (o, true)),
        Command::Dispersion(c) => cmd_dispersion(&load(&c)?).map(|o| (o, true)),
        Command::Gaps(c) => cmd_gaps(&load(&c)?).map(|o| (o, true)),
        Command::Verify(c) => {
            let (o, results) = cmd_verify(&load(&c)?, |r| println!("{}", r.line()))?;
            let passed = results.iter().all(|r| r.passed);
            Ok((o, passed))
        }
    }
}

fn main() -> ExitCode {
    let mut cmd = <Cli as clap::CommandFactory>::command();
    let help = format!("{}{}", cmd.get_after_long_help().map(|s| s.to_string()).unwrap_or_default(), config::DEFAULTS);
    cmd = cmd.after_long_help(help);
    let cli = match <Cli as clap::FromArgMatches>::from_arg_matches(&cmd.get_matches()) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok((out, passed)) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            if passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: {}", CliError::Verification("acceptance criteria failed".into()));
                ExitCode::from(4)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
