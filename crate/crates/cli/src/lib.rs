//! Command-line front end for `switchcert`: scenario files, the bundled
//! example catalog, and the `certify`, `simulate`, `mc`, `ctmc-check` and
//! `stabilize` commands.
//!
//! Exit codes: 0 pass, 1 fail, 2 advisory pass, 3 usage or config error.

pub mod commands;
pub mod config;
pub mod svg;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{CommandError, Outcome, Overrides};
use config::{ConfigError, Scenario, ScenarioConfig};

pub const EXIT_USAGE: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "switchcert", version, about = "Certify and simulate randomly switched systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the slow-switching certificate.
    Certify(CommonArgs),
    /// Integrate one trajectory along one switching signal.
    Simulate(CommonArgs),
    /// Run the Monte Carlo ensemble against the expected-value bounds.
    Mc(CommonArgs),
    /// Compare sampled switch counts with the generator-derived bound.
    CtmcCheck(CommonArgs),
    /// Close the loop with the universal-formula feedback and check decrease.
    Stabilize(CommonArgs),
    /// Print the normalized scenario file.
    Config(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Scenario file.
    #[arg(long, value_name = "PATH", conflicts_with = "example", required_unless_present = "example")]
    pub config: Option<PathBuf>,
    /// Bundled scenario name.
    #[arg(long, value_name = "NAME")]
    pub example: Option<String>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Directory for CSV, SVG and report output.
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_name = "N")]
    pub trajectories: Option<usize>,
    /// Also write SVG plots.
    #[arg(long)]
    pub svg: bool,
    /// Worker threads for ensembles (results do not depend on it).
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: Option<u64>,
}

impl CommonArgs {
    pub fn scenario_config(&self) -> Result<ScenarioConfig, ConfigError> {
        match (&self.config, &self.example) {
            (Some(path), _) => ScenarioConfig::load(path),
            (None, Some(name)) => {
                let text = config::bundled(name).ok_or_else(|| {
                    let names: Vec<&str> = config::BUNDLED.iter().map(|(n, _)| *n).collect();
                    ConfigError::Invalid(format!("no bundled example `{name}`; available: {}", names.join(", ")))
                })?;
                ScenarioConfig::from_json(text)
            }
            (None, None) => Err(ConfigError::Invalid("pass --config or --example".into())),
        }
    }

    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            trajectories: self.trajectories,
            svg: self.svg,
        }
    }
}

/// Runs a scenario command without touching the filesystem.
pub fn execute(command: &Command, scenario: &Scenario, overrides: &Overrides) -> Result<Outcome, CommandError> {
    match command {
        Command::Certify(_) => commands::cmd_certify(scenario, overrides),
        Command::Simulate(_) => commands::cmd_simulate(scenario, overrides),
        Command::Mc(_) => commands::cmd_mc(scenario, overrides),
        Command::CtmcCheck(_) => commands::cmd_ctmc_check(scenario, overrides),
        Command::Stabilize(_) => commands::cmd_stabilize(scenario, overrides),
        Command::Config(_) => Ok(Outcome {
            status: commands::Status::Pass,
            report: scenario.config.to_normalized_json(),
            files: Vec::new(),
        }),
    }
}

fn common(command: &Command) -> &CommonArgs {
    match command {
        Command::Certify(a)
        | Command::Simulate(a)
        | Command::Mc(a)
        | Command::CtmcCheck(a)
        | Command::Stabilize(a)
        | Command::Config(a) => a,
    }
}

/// Parses arguments, runs the command, writes outputs and returns the exit
/// code. Reports go to `stdout`, diagnostics to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(stdout, "{}", e.render());
            return 0;
        }
    };
    let args = common(&cli.command);
    let scenario = match args.scenario_config().and_then(ScenarioConfig::build) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let overrides = args.overrides();
    let result = match args.workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n as usize).build() {
            Ok(pool) => pool.install(|| execute(&cli.command, &scenario, &overrides)),
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                return EXIT_USAGE;
            }
        },
        None => execute(&cli.command, &scenario, &overrides),
    };
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return e.exit_code();
        }
    };
    let _ = stdout.write_all(outcome.report.as_bytes());
    if !matches!(cli.command, Command::Config(_)) {
        if let Err(e) = outcome.write_to(&args.out) {
            let _ = writeln!(stderr, "error: cannot write to {}: {e}", args.out.display());
            return 1;
        }
    }
    outcome.status.exit_code()
}
