use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toml::Value;

mod commands;
mod config;
mod verify;

use config::{ConfigError, Overrides, RunConfig, SchemeName};

/// Mullins–Sekerka flow in a rectangular container.
///
/// Settings come from an optional TOML file, the `MSFLOW_OUTPUT_DIR`
/// environment variable and command-line flags; later sources win.
#[derive(Debug, Parser)]
#[command(name = "msflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve the initial condition and write the trajectory.
    Simulate(Common),
    /// Assemble the linearized operator and check its spectrum.
    Spectrum(Common),
    /// Tabulate the strip and half-space symbols.
    Symbol(Common),
    /// Run the verification suite.
    Verify(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set grid.nx=64`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    t_final: Option<f64>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeName>,
    #[arg(long, allow_negative_numbers = true)]
    tolerance_factor: Option<f64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, ConfigError> {
        let mut overrides = Overrides::default();
        for s in &self.set {
            overrides.set_raw(s)?;
        }
        if let Some(n) = self.nodes {
            overrides.set("grid.nodes", Value::Integer(n as i64));
        }
        if let Some(dt) = self.dt {
            overrides.set("stepper.dt", Value::Float(dt));
        }
        if let Some(t) = self.t_final {
            overrides.set("stepper.t_final", Value::Float(t));
        }
        if let Some(s) = self.scheme {
            let name = match s {
                SchemeName::ImexEuler => "imex-euler",
                SchemeName::ImexBdf2 => "imex-bdf2",
            };
            overrides.set("stepper.scheme", Value::String(name.into()));
        }
        if let Some(f) = self.tolerance_factor {
            overrides.set("verify.tolerance_factor", Value::Float(f));
        }
        if let Some(dir) = &self.output_dir {
            overrides.set("output.dir", Value::String(dir.to_string_lossy().into_owned()));
        }
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, action): (&Common, fn(&RunConfig) -> anyhow::Result<ExitCode>) = match &cli.command {
        Command::Simulate(c) => (c, commands::simulate),
        Command::Spectrum(c) => (c, commands::spectrum),
        Command::Symbol(c) => (c, commands::symbol),
        Command::Verify(c) => (c, commands::verify),
    };
    let config = match common.load() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match action(&config) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
