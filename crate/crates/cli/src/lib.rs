//! Command-line driver: TOML scenario files in, CSV traces and JSON summaries out.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::{parse_config, Protocol, ScenarioConfig};
pub use error::CliError;
pub use run::{run, RunSummary};

#[derive(Debug, Parser)]
#[command(name = "sim", version, about = "Rydberg ensemble protocol simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override a config value, e.g. `--set ensemble.atoms=[1,2]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    DoubleStirap(CommonArgs),
    DoubleArp(CommonArgs),
    PiBaseline(CommonArgs),
    SingleQubitGate(CommonArgs),
    Ramsey(CommonArgs),
    Cnot(CommonArgs),
    PhaseSweep(CommonArgs),
    PoissonAverage(CommonArgs),
    BlockadeEstimate(CommonArgs),
    Basis(CommonArgs),
}

impl Command {
    pub fn split(&self) -> (Protocol, &CommonArgs) {
        match self {
            Command::DoubleStirap(a) => (Protocol::DoubleStirap, a),
            Command::DoubleArp(a) => (Protocol::DoubleArp, a),
            Command::PiBaseline(a) => (Protocol::PiBaseline, a),
            Command::SingleQubitGate(a) => (Protocol::SingleQubitGate, a),
            Command::Ramsey(a) => (Protocol::Ramsey, a),
            Command::Cnot(a) => (Protocol::Cnot, a),
            Command::PhaseSweep(a) => (Protocol::PhaseSweep, a),
            Command::PoissonAverage(a) => (Protocol::PoissonAverage, a),
            Command::BlockadeEstimate(a) => (Protocol::BlockadeEstimate, a),
            Command::Basis(a) => (Protocol::Basis, a),
        }
    }
}

/// Load the config file and apply `--out` and `--set`.
pub fn load(protocol: Protocol, args: &CommonArgs) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut config = parse_config(&text, protocol, &args.set)?;
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

/// Run one invocation and return the process exit code. Errors go to stderr
/// as JSON and, when the output directory is known, to `error.json`.
pub fn execute(cli: &Cli) -> i32 {
    let (protocol, args) = cli.command.split();
    let mut out_dir: Option<PathBuf> = args.out.clone();
    let outcome = load(protocol, args).and_then(|config| {
        out_dir = Some(config.out_dir.clone());
        run(&config).map(|summary| (config, summary))
    });
    match outcome {
        Ok((config, summary)) => {
            let text = serde_json::to_string_pretty(&summary.to_json(&config)).unwrap_or_default();
            println!("{text}");
            0
        }
        Err(err) => {
            report_error(&err, out_dir.as_deref());
            err.exit_code()
        }
    }
}

fn report_error(err: &CliError, out_dir: Option<&Path>) {
    let report = serde_json::to_value(err.report()).unwrap_or_default();
    eprintln!("{}", serde_json::to_string_pretty(&report).unwrap_or_default());
    if let Some(dir) = out_dir {
        if std::fs::create_dir_all(dir).is_ok() {
            let _ = output::write_json(&dir.join("error.json"), &report);
        }
    }
}
