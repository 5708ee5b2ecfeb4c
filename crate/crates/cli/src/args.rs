//! Command-line grammar and the requests it produces.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lanesafe_core::ScenarioId;

#[derive(Debug, Parser)]
#[command(
    name = "lanesafe",
    version,
    about = "Closed-loop steering controller scenario runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Run one scenario and write its artifacts.
    Run(RunArgs),
    /// Print the built-in scenario ids.
    List,
    /// Run several scenarios in parallel, one output directory each.
    Batch(BatchArgs),
    /// Re-solve every QP in a dump and compare with the recorded answers.
    Replay {
        /// Path to a qp.jsonl file written by `run --dump-qp`.
        dump: PathBuf,
    },
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["scenario", "config"]))]
struct RunArgs {
    /// Built-in scenario id (see `list`).
    #[arg(long, value_parser = parse_id)]
    scenario: Option<ScenarioId>,
    /// Scenario JSON file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
    /// Write config.json (after overrides) and stop.
    #[arg(long)]
    emit_config: bool,
}

#[derive(Debug, Args)]
struct BatchArgs {
    /// Scenario ids to run; all built-ins when omitted.
    #[arg(long = "scenario", value_parser = parse_id)]
    scenarios: Vec<ScenarioId>,
    #[command(flatten)]
    common: Common,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the step size (s).
    #[arg(long)]
    dt: Option<f64>,
    /// Override the horizon (s).
    #[arg(long)]
    duration: Option<f64>,
    /// Write trajectory.csv.
    #[arg(long)]
    csv: bool,
    /// Write trajectory.svg.
    #[arg(long)]
    svg: bool,
    /// Write metrics.json.
    #[arg(long)]
    metrics: bool,
    /// Write every QP and its solution to qp.jsonl.
    #[arg(long)]
    dump_qp: bool,
}

fn parse_id(s: &str) -> Result<ScenarioId, String> {
    s.parse().map_err(|e: lanesafe_core::Error| e.to_string())
}

/// Where the scenario comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Builtin(ScenarioId),
    File(PathBuf),
}

/// Artifacts to write. With none of csv/svg/metrics named, all three are on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Emit {
    pub csv: bool,
    pub svg: bool,
    pub metrics: bool,
    pub dump_qp: bool,
    pub config: bool,
}

impl Default for Emit {
    fn default() -> Self {
        Self {
            csv: true,
            svg: true,
            metrics: true,
            dump_qp: false,
            config: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRequest {
    pub source: Source,
    pub out: PathBuf,
    pub dt: Option<f64>,
    pub duration: Option<f64>,
    pub emit: Emit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRequest {
    pub scenarios: Vec<ScenarioId>,
    pub out: PathBuf,
    pub dt: Option<f64>,
    pub duration: Option<f64>,
    pub emit: Emit,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Run(RunRequest),
    List,
    Batch(BatchRequest),
    Replay(PathBuf),
}

impl Common {
    fn emit(&self, config: bool) -> Emit {
        let any = self.csv || self.svg || self.metrics;
        Emit {
            csv: self.csv || !any,
            svg: self.svg || !any,
            metrics: self.metrics || !any,
            dump_qp: self.dump_qp,
            config,
        }
    }
}

/// Parses `argv` without the program name.
pub fn parse_args<I, T>(argv: I) -> Result<Command, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(
        std::iter::once("lanesafe".into()).chain(argv.into_iter().map(Into::into)),
    )?;
    Ok(match cli.command {
        Sub::Run(a) => {
            let source = match (a.scenario, a.config) {
                (Some(id), None) => Source::Builtin(id),
                (None, Some(path)) => Source::File(path),
                _ => unreachable!("clap enforces exactly one source"),
            };
            Command::Run(RunRequest {
                source,
                emit: a.common.emit(a.emit_config),
                out: a.common.out,
                dt: a.common.dt,
                duration: a.common.duration,
            })
        }
        Sub::List => Command::List,
        Sub::Batch(a) => Command::Batch(BatchRequest {
            scenarios: if a.scenarios.is_empty() {
                ScenarioId::ALL.to_vec()
            } else {
                a.scenarios
            },
            emit: a.common.emit(false),
            out: a.common.out,
            dt: a.common.dt,
            duration: a.common.duration,
            jobs: a.jobs,
        }),
        Sub::Replay { dump } => Command::Replay(dump),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_run_with_defaults() {
        let cmd = parse_args(["run", "--scenario", "fars220", "--out", "o/"]).unwrap();
        assert_eq!(
            cmd,
            Command::Run(RunRequest {
                source: Source::Builtin(ScenarioId::Fars220),
                out: PathBuf::from("o/"),
                dt: None,
                duration: None,
                emit: Emit::default(),
            })
        );
    }

    #[test]
    fn bare_run_is_a_usage_error() {
        assert!(parse_args(["run"]).is_err());
    }

    #[test]
    fn config_with_dt_override() {
        let Command::Run(r) = parse_args(["run", "--config", "s.json", "--dt", "0.005"]).unwrap()
        else {
            panic!("expected run");
        };
        assert_eq!(r.source, Source::File("s.json".into()));
        assert_eq!(r.dt, Some(0.005));
    }

    #[test]
    fn both_sources_rejected() {
        assert!(parse_args(["run", "--scenario", "lane_change", "--config", "a.json"]).is_err());
    }

    #[test]
    fn unknown_flag_and_scenario_rejected() {
        assert!(parse_args(["run", "--scenario", "lane_change", "--fast"]).is_err());
        assert!(parse_args(["run", "--scenario", "nope"]).is_err());
    }

    #[test]
    fn explicit_artifact_flags_select() {
        let Command::Run(r) =
            parse_args(["run", "--scenario", "static_one", "--csv", "--dump-qp"]).unwrap()
        else {
            panic!("expected run");
        };
        assert!(r.emit.csv && r.emit.dump_qp);
        assert!(!r.emit.svg && !r.emit.metrics && !r.emit.config);
    }

    #[test]
    fn batch_defaults_to_every_scenario() {
        let Command::Batch(b) = parse_args(["batch"]).unwrap() else {
            panic!("expected batch");
        };
        assert_eq!(b.scenarios, ScenarioId::ALL.to_vec());
        assert_eq!(b.out, PathBuf::from("out"));
    }
}
