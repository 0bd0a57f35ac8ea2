//! `resweave`: annotate, integrate, simulate, check and export resource-aware
//! guideline charts.
//!
//! Exit codes: 0 on success (all properties hold), 1 when a property is
//! violated, 2 on usage, parse or validation errors.

mod commands;
mod load;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use resweave_core::verify::DEFAULT_SCENARIO_CAP;

#[derive(Parser)]
#[command(
    name = "resweave",
    version,
    about = "Weave resource availability into statechart guideline models"
)]
struct Cli {
    /// Print diagnostics as JSON lines on stderr.
    #[arg(long, global = true)]
    json_diagnostics: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Attach //@RES annotations from a resource map.
    Annotate(AnnotateArgs),
    /// Strengthen guards of an annotated model and synthesize timer and resource charts.
    Integrate(IntegrateArgs),
    /// Simulate one resolved scenario and write its trace.
    Simulate(SimulateArgs),
    /// Check invariant properties over every resolved scenario.
    Check(CheckArgs),
    /// Export the composition as timed automata (.xta) plus queries (.q).
    Export(ExportArgs),
}

#[derive(Args)]
struct AnnotateArgs {
    model: PathBuf,
    #[arg(long)]
    map: PathBuf,
    /// Annotated model file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IntegrateArgs {
    /// Annotated guideline model.
    model: PathBuf,
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Treat resources missing from the schedule as always available.
    #[arg(long)]
    assume_available: bool,
    /// Directory for chart files and manifest.json.
    #[arg(long)]
    out: PathBuf,
}

/// Where the composition comes from: a manifest written by `integrate`, or a
/// guideline model run through the whole pipeline in process.
#[derive(Args)]
struct Source {
    #[arg(long, conflicts_with_all = ["model", "map", "schedule", "assume_available"])]
    manifest: Option<PathBuf>,
    /// Unannotated guideline model.
    #[arg(long, required_unless_present = "manifest")]
    model: Option<PathBuf>,
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Treat resources missing from the schedule as always available.
    #[arg(long)]
    assume_available: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Fix a choice variable, e.g. `--choice hemorrhage=false`.
    #[arg(long = "choice", value_name = "VAR=VALUE")]
    choices: Vec<String>,
    /// Overrides the scenario's horizon (720 when neither is given).
    #[arg(long)]
    horizon: Option<i64>,
    /// Re-execute the transitions recorded in a JSON trace.
    #[arg(long, value_name = "TRACE_JSON")]
    replay: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    properties: PathBuf,
    /// Overrides the scenario's horizon (720 when neither is given).
    #[arg(long)]
    horizon: Option<i64>,
    #[arg(long, default_value_t = DEFAULT_SCENARIO_CAP)]
    scenario_cap: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    source: Source,
    /// Property file rendered into the .q sidecar.
    #[arg(long)]
    properties: Option<PathBuf>,
    /// Map `.` in identifiers to `_`.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    flatten_names: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let ctx = commands::Context {
        json_diagnostics: cli.json_diagnostics,
    };
    let result = match cli.command {
        Command::Annotate(a) => commands::annotate(&ctx, &a.model, &a.map, &a.out),
        Command::Integrate(a) => commands::integrate(
            &ctx,
            &a.model,
            a.map.as_deref(),
            a.schedule.as_deref(),
            a.assume_available,
            &a.out,
        ),
        Command::Simulate(a) => commands::simulate(
            &ctx,
            &a.source.into(),
            a.scenario.as_deref(),
            &a.choices,
            a.horizon,
            a.replay.as_deref(),
            &a.out,
        ),
        Command::Check(a) => commands::check(
            &ctx,
            &a.source.into(),
            a.scenario.as_deref(),
            &a.properties,
            a.horizon,
            a.scenario_cap,
            &a.out,
        ),
        Command::Export(a) => {
            commands::export(&ctx, &a.source.into(), a.properties.as_deref(), a.flatten_names, &a.out)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

impl From<Source> for load::Source {
    fn from(s: Source) -> Self {
        match s.manifest {
            Some(path) => load::Source::Manifest(path),
            None => load::Source::Model {
                model: s.model.expect("clap enforces --model without --manifest"),
                map: s.map,
                schedule: s.schedule,
                assume_available: s.assume_available,
            },
        }
    }
}
