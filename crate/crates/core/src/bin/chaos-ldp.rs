use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use chaos_ldp::cli::{run_config, Overrides};
use chaos_ldp::ldp::Speed;

#[derive(Parser)]
#[command(name = "chaos-ldp", version, about = "Wiener chaos rate functions and tilted rare-event estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage requested by a JSON config.
    Run {
        config: PathBuf,
        /// Master seed; overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 or unset: all cores).
        #[arg(long, env = "CHAOS_LDP_THREADS")]
        threads: Option<usize>,
        /// Speed used for empirical rates.
        #[arg(long, value_enum)]
        speed: Option<SpeedArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SpeedArg {
    Eps,
    Eps2,
}

fn main() -> ExitCode {
    let Command::Run {
        config,
        seed,
        out,
        threads,
        speed,
    } = Cli::parse().command;
    let overrides = Overrides {
        seed,
        out,
        threads,
        speed: speed.map(|s| match s {
            SpeedArg::Eps => Speed::Eps,
            SpeedArg::Eps2 => Speed::Eps2,
        }),
    };
    let outcome = run_config(&config, &overrides);
    if let Some(err) = &outcome.error {
        let line = serde_json::json!({ "error": err });
        eprintln!("{line}");
    }
    if let Some(dir) = &outcome.output_dir {
        println!("{}", dir.display());
    }
    ExitCode::from(outcome.status as u8)
}
