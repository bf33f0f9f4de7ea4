//! Command-line front end.
//!
//! Exit codes: 0 when the shift (or sizing) is feasible, 2 when it is
//! infeasible, 1 on configuration or runtime errors.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::driveline::ModelKind;
use crate::error::{Error, Result};
use commands::{SweepParameter, SweepSpec, EXIT_ERROR, EXIT_OK};
pub use config::{load_config, parse_config, ConfigDocument};

#[derive(Debug, Parser)]
#[command(name = "gearshift", version, about = "No-jerk gearshift simulation and feasibility checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Print JSON instead of text.
    #[arg(long)]
    pub machine_readable: bool,
}

#[derive(Debug, Args)]
pub struct ShiftArgs {
    #[command(flatten)]
    pub common: Common,
    /// Scenario name from the configuration.
    #[arg(long)]
    pub scenario: String,
    /// dct-friction, dct-owc, dbt-simple or dbt-full.
    #[arg(long)]
    pub model: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the no-jerk trajectory and write it as CSV.
    Simulate {
        #[command(flatten)]
        shift: ShiftArgs,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the saturation feasibility check for a scenario.
    Check {
        #[command(flatten)]
        shift: ShiftArgs,
    },
    /// Check motor ratings against the sizing design specs.
    SizeMotor {
        #[command(flatten)]
        common: Common,
        /// Only evaluate this ratio set.
        #[arg(long)]
        ratio_set: Option<String>,
        /// Wheel-torque envelope CSV destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat the feasibility check over a range of one parameter.
    Sweep {
        #[command(flatten)]
        shift: ShiftArgs,
        /// Parameter path, e.g. scenario.acceleration.
        #[arg(long)]
        param: String,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (program name first) and runs the command. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{rendered}");
                return EXIT_ERROR;
            }
            let _ = write!(out, "{rendered}");
            return EXIT_OK;
        }
    };
    match execute(&cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(Error::from)
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Unsupported(format!("JSON encoding failed: {e}")))
}

fn io(r: std::io::Result<()>) -> Result<()> {
    r.map_err(Error::from)
}

fn shift_inputs(shift: &ShiftArgs) -> Result<(ConfigDocument, ModelKind)> {
    let kind: ModelKind = shift.model.parse()?;
    let doc = load_config(&shift.common.config)?;
    doc.scenario(&shift.scenario)?;
    Ok((doc, kind))
}

fn execute(command: &Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Simulate { shift, out: path } => {
            let (doc, kind) = shift_inputs(shift)?;
            let summary = commands::simulate(&doc, &shift.scenario, kind)?;
            let text = if shift.common.machine_readable {
                json(&summary)? + "\n"
            } else {
                commands::render_simulation(&summary)
            };
            let csv = summary.trajectory.as_ref().map(commands::trajectory_csv);
            match (path, csv) {
                (Some(p), Some(csv)) => {
                    write_file(p, &csv)?;
                    io(out.write_all(text.as_bytes()))?;
                }
                (None, Some(csv)) => {
                    io(out.write_all(csv.as_bytes()))?;
                    io(err.write_all(text.as_bytes()))?;
                }
                (_, None) => io(out.write_all(text.as_bytes()))?,
            }
            Ok(summary.exit_code())
        }
        Command::Check { shift } => {
            let (doc, kind) = shift_inputs(shift)?;
            let report = commands::check(&doc, &shift.scenario, kind)?;
            let text =
                if shift.common.machine_readable { json(&report)? + "\n" } else { commands::render_report(&report) };
            io(out.write_all(text.as_bytes()))?;
            Ok(commands::check_exit_code(&report))
        }
        Command::SizeMotor { common, ratio_set, out: path } => {
            let doc = load_config(&common.config)?;
            let outcome = commands::size_motor(&doc, ratio_set.as_deref())?;
            if let Some(p) = path {
                write_file(p, &commands::envelope_csv(&outcome.envelope))?;
            }
            let text = if common.machine_readable { json(&outcome)? + "\n" } else { commands::render_sizing(&outcome) };
            io(out.write_all(text.as_bytes()))?;
            Ok(outcome.exit_code())
        }
        Command::Sweep { shift, param, from, to, steps, out: path } => {
            let spec = SweepSpec { parameter: param.parse::<SweepParameter>()?, from: *from, to: *to, steps: *steps };
            spec.validate()?;
            let (doc, kind) = shift_inputs(shift)?;
            let rows = commands::sweep(&doc, &shift.scenario, kind, &spec)?;
            let text = if shift.common.machine_readable { json(&rows)? + "\n" } else { commands::sweep_csv(&rows) };
            match path {
                Some(p) => write_file(p, &text)?,
                None => io(out.write_all(text.as_bytes()))?,
            }
            Ok(EXIT_OK)
        }
    }
}
