//! Front end for the lanesafe simulator: argument parsing, config loading,
//! artifact writing and batch execution.

pub mod args;
pub mod artifacts;
pub mod dump;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use lanesafe_core::{build_scenario, compute_metrics, run_with, Metrics, ScenarioConfig};

pub use args::{parse_args, BatchRequest, Command, Emit, RunRequest, Source};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_COLLISION: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] lanesafe_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Stream(#[from] std::io::Error),
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Format(String),
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Reads a scenario JSON document. Unknown keys are rejected.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_at(path))?;
    let config: ScenarioConfig = serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_owned(),
        source,
    })?;
    config.validate()?;
    Ok(config)
}

pub fn config_json(config: &ScenarioConfig) -> String {
    let mut s = serde_json::to_string_pretty(config).expect("config serialises");
    s.push('\n');
    s
}

/// Scenario named by `source` with the overrides applied and validated.
pub fn resolve(
    source: &Source,
    dt: Option<f64>,
    duration: Option<f64>,
) -> Result<ScenarioConfig, CliError> {
    let mut config = match source {
        Source::Builtin(id) => build_scenario(*id),
        Source::File(path) => load_config(path)?,
    };
    if let Some(dt) = dt {
        config.dt = dt;
    }
    if let Some(d) = duration {
        config.duration = d;
    }
    config.validate()?;
    Ok(config)
}

pub fn exit_code(m: &Metrics) -> i32 {
    if m.collision {
        EXIT_COLLISION
    } else if m.infeasible_steps > 0 {
        EXIT_INFEASIBLE
    } else {
        EXIT_OK
    }
}

/// Result of one executed scenario.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub name: String,
    pub steps: usize,
    pub metrics: Option<Metrics>,
    pub written: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        self.metrics.as_ref().map_or(EXIT_OK, exit_code)
    }

    pub fn summary(&self) -> String {
        match &self.metrics {
            None => format!("{}: wrote {}", self.name, self.written[0].display()),
            Some(m) => format!(
                "{}: steps={} min_clearance={} collision={} infeasible_steps={} max_lateral_error={:.4} goal_reached={} return_time={}",
                self.name,
                self.steps,
                m.min_clearance,
                m.collision,
                m.infeasible_steps,
                m.max_lateral_error,
                m.goal_reached,
                m.return_time.map_or("none".to_owned(), |t| format!("{t:.2}")),
            ),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(io_at(path))?))
}

/// Runs `config` and writes the artifacts selected by `emit` into `out`.
pub fn execute_config(
    config: &ScenarioConfig,
    out: &Path,
    emit: Emit,
) -> Result<Outcome, CliError> {
    fs::create_dir_all(out).map_err(io_at(out))?;
    let mut written = Vec::new();

    if emit.config {
        let path = out.join("config.json");
        fs::write(&path, config_json(config)).map_err(io_at(&path))?;
        written.push(path);
        return Ok(Outcome {
            name: config.name.clone(),
            steps: 0,
            metrics: None,
            written,
        });
    }

    let mut dump = if emit.dump_qp {
        let path = out.join("qp.jsonl");
        let w = create(&path)?;
        written.push(path);
        Some(w)
    } else {
        None
    };
    let mut step = 0;
    let mut dump_err = None;
    let log = run_with(config, |p, s| {
        if let Some(w) = dump.as_mut() {
            if dump_err.is_none() {
                dump_err = dump::write_entry(w, &dump::DumpEntry::new(step, p, s)).err();
            }
        }
        step += 1;
    })?;
    if let Some(e) = dump_err {
        return Err(e);
    }
    if let Some(mut w) = dump {
        w.flush()?;
    }

    let metrics = compute_metrics(&log);
    if emit.csv {
        let path = out.join("trajectory.csv");
        artifacts::write_csv(&log, create(&path)?)?;
        written.push(path);
    }
    if emit.metrics {
        let path = out.join("metrics.json");
        fs::write(&path, artifacts::metrics_json(&metrics)).map_err(io_at(&path))?;
        written.push(path);
    }
    if emit.svg {
        let path = out.join("trajectory.svg");
        fs::write(&path, artifacts::svg(&log)).map_err(io_at(&path))?;
        written.push(path);
    }
    Ok(Outcome {
        name: config.name.clone(),
        steps: log.records.len(),
        metrics: Some(metrics),
        written,
    })
}

pub fn execute_run(req: &RunRequest) -> Result<Outcome, CliError> {
    let config = resolve(&req.source, req.dt, req.duration)?;
    execute_config(&config, &req.out, req.emit)
}

/// Runs every scenario of `req` on a pool of scoped threads. Results keep the
/// request order.
pub fn execute_batch(req: &BatchRequest) -> Vec<Result<Outcome, CliError>> {
    let jobs = req
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<Result<Outcome, CliError>>>> = req
        .scenarios
        .iter()
        .map(|_| std::sync::Mutex::new(None))
        .collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(req.scenarios.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some(&id) = req.scenarios.get(i) else {
                    break;
                };
                let result = resolve(&Source::Builtin(id), req.dt, req.duration)
                    .and_then(|c| execute_config(&c, &req.out.join(id.as_str()), req.emit));
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("every slot is filled"))
        .collect()
}

/// Worst code wins: error, then collision, then infeasibility.
pub fn combine_codes(codes: impl IntoIterator<Item = i32>) -> i32 {
    let rank = |c: i32| match c {
        EXIT_ERROR => 3,
        EXIT_COLLISION => 2,
        EXIT_INFEASIBLE => 1,
        _ => 0,
    };
    codes
        .into_iter()
        .max_by_key(|&c| rank(c))
        .unwrap_or(EXIT_OK)
}

/// Executes a parsed command, printing to stdout/stderr. Returns the exit code.
pub fn execute(cmd: &Command) -> i32 {
    match cmd {
        Command::List => {
            for id in lanesafe_core::ScenarioId::ALL {
                println!("{id}");
            }
            EXIT_OK
        }
        Command::Run(req) => match execute_run(req) {
            Ok(o) => {
                println!("{}", o.summary());
                o.exit_code()
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_ERROR
            }
        },
        Command::Batch(req) => combine_codes(execute_batch(req).into_iter().map(|r| match r {
            Ok(o) => {
                println!("{}", o.summary());
                o.exit_code()
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_ERROR
            }
        })),
        Command::Replay(path) => {
            let result = File::open(path)
                .map_err(io_at(path))
                .and_then(|f| dump::replay(BufReader::new(f)));
            match result {
                Ok(s) if s.mismatched.is_empty() => {
                    println!("{}: {} problems, all reproduced", path.display(), s.total);
                    EXIT_OK
                }
                Ok(s) => {
                    println!(
                        "{}: {} of {} problems differ (first at step {})",
                        path.display(),
                        s.mismatched.len(),
                        s.total,
                        s.mismatched[0]
                    );
                    EXIT_ERROR
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_ERROR
                }
            }
        }
    }
}

/// `main` body: parse, execute, map usage errors to exit code 1.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match parse_args(argv) {
        Ok(cmd) => execute(&cmd),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_ERROR
            } else {
                EXIT_OK
            }
        }
    }
}
