use std::path::PathBuf;
use std::process::ExitCode;

use bicopter_cli::{cmd_check, cmd_plan, cmd_simulate, cmd_verify_derivatives, OUT_DIR_ENV};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bicopter",
    version,
    about = "Safety-constrained planar bicopter controller"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its CSV log
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Log path; overrides the config's `output`
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for relative log paths
        #[arg(long = "out-dir", env = OUT_DIR_ENV)]
        out_dir: Option<PathBuf>,
    },
    /// Re-check the safety and Lyapunov invariants of an existing log
    Check {
        /// Log to check
        log: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare closed-form derivatives with finite differences
    VerifyDerivatives {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Take plant parameters, gains and bounds from a config
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the resolved waypoint plan
    Plan {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    let status = match cli.command {
        Command::Simulate {
            config,
            out: out_path,
            out_dir,
        } => cmd_simulate(
            &config,
            out_path.as_deref(),
            out_dir.as_deref(),
            &mut out,
            &mut err,
        ),
        Command::Check { log, config } => cmd_check(&log, &config, &mut out, &mut err),
        Command::VerifyDerivatives {
            seed,
            count,
            config,
        } => cmd_verify_derivatives(seed, count, config.as_deref(), &mut out, &mut err),
        Command::Plan { config } => cmd_plan(&config, &mut out, &mut err),
    };
    ExitCode::from(status.code())
}
