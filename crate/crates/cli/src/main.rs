use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wkg_cli::commands::{config_beside_checkpoint, execute, verify, Suite};
use wkg_cli::config::{ConfigError, SCHEMA};
use wkg_cli::{load_config, presets};

#[derive(Parser)]
#[command(name = "wkg", version, about = "Pseudo-spectral wave / Klein-Gordon simulator with vector-field diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// TOML configuration file.
    config: Option<PathBuf>,
    /// Use a built-in configuration instead of a file.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a configuration and write diagnostics.
    Run(Source),
    /// Run a check battery and report pass/fail as JSON.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        #[command(flatten)]
        source: Source,
    },
    /// Continue a run from one of its checkpoints.
    Resume {
        checkpoint: PathBuf,
        /// Configuration of the original run; defaults to the copy saved in its output directory.
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
    },
    /// Print every configuration key with its type and default.
    PrintConfigSchema,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Run(src) => {
            let (cfg, text) = load_config(src.config.as_deref(), src.preset.as_deref())?;
            let out = execute(&cfg, &text, None)?;
            println!("{}", serde_json::to_string_pretty(&out.summary.diagnostics.fits)?);
            eprintln!("wrote {} files to {}", out.files.len(), cfg.output.directory.display());
        }
        Command::Verify { suite, source } => {
            let (cfg, text) = load_config(source.config.as_deref(), source.preset.as_deref())?;
            let report = verify(&cfg, &text, suite)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.passed {
                eprintln!("failed checks: {}", report.failures().join(", "));
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Resume { checkpoint, config, preset } => {
            let config = match (&config, &preset) {
                (None, None) => Some(config_beside_checkpoint(&checkpoint).ok_or_else(|| {
                    anyhow::anyhow!("no config.toml beside {}; pass --config", checkpoint.display())
                })?),
                _ => config,
            };
            let (cfg, text) = load_config(config.as_deref(), preset.as_deref())?;
            let out = execute(&cfg, &text, Some(&checkpoint))?;
            eprintln!("wrote {} files to {}", out.files.len(), cfg.output.directory.display());
        }
        Command::PrintConfigSchema => {
            let doc = serde_json::json!({ "keys": SCHEMA, "presets": presets::names() });
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}
