use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use distortion_lab::config::{ExperimentConfig, KEYS};
use distortion_lab::run::{execute, EXIT_INPUT};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Subcommand {
    Distortion,
    Bmo1,
    Bmo2,
    Tail,
    Sharpness,
    Claims,
    Jn,
    Pde,
    Align,
    Sweep,
}

impl Subcommand {
    fn name(self) -> &'static str {
        match self {
            Subcommand::Distortion => "distortion",
            Subcommand::Bmo1 => "bmo1",
            Subcommand::Bmo2 => "bmo2",
            Subcommand::Tail => "tail",
            Subcommand::Sharpness => "sharpness",
            Subcommand::Claims => "claims",
            Subcommand::Jn => "jn",
            Subcommand::Pde => "pde",
            Subcommand::Align => "align",
            Subcommand::Sweep => "sweep",
        }
    }
}

/// Numerical checks for ε-distorted maps.
///
/// Exit status: 0 when every check passes, 2 when a check fails, 1 on
/// malformed input or I/O failure.
#[derive(Debug, Parser)]
#[command(name = "distortion-lab", version)]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum, required_unless_present = "list_keys")]
    subcommand: Option<Subcommand>,

    /// Flat `key = value` configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,

    /// Override one key, e.g. `--set eps=0.05`. Repeatable.
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// List configuration keys with defaults and exit.
    #[arg(long)]
    list_keys: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list_keys {
        for (key, default, meaning) in KEYS {
            println!("{key:<20} {default:<28} {meaning}");
        }
        return ExitCode::SUCCESS;
    }
    let text = match &cli.config {
        None => String::new(),
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return ExitCode::from(EXIT_INPUT as u8);
            }
        },
    };
    let cfg = match ExperimentConfig::from_text(&text, &cli.set) {
        Ok(c) => c,
        Err(e) => {
            match &cli.config {
                Some(path) => eprintln!("error: {}: {e}", path.display()),
                None => eprintln!("error: {e}"),
            }
            return ExitCode::from(EXIT_INPUT as u8);
        }
    };
    let subcommand = cli.subcommand.expect("required unless listing keys");
    ExitCode::from(execute(subcommand.name(), &cfg) as u8)
}
