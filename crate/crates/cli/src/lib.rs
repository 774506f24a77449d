//! Config-driven experiment runner for `plurikit-core`.
//!
//! `plurikit <command> --config <file> --out <dir> [--workers N]` writes a
//! `manifest.toml`, one CSV per table and a `summary.txt` with one PASS/FAIL
//! line per gate. Exit codes: 0 pass, 1 gate failure, 2 usage or config
//! error, 3 numerical error.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use commands::Command;
pub use config::{Config, ConfigError};
pub use output::{Gate, Outcome, Table};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_GATE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical error in stage `{stage}`: {source}")]
    Numerical {
        stage: &'static str,
        source: plurikit_core::Error,
    },
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Numerical { .. } => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        }
    }
}

/// Tags core errors with the stage that raised them.
pub trait Stage<T> {
    fn at(self, stage: &'static str) -> Result<T, RunError>;
}

impl<T> Stage<T> for plurikit_core::Result<T> {
    fn at(self, stage: &'static str) -> Result<T, RunError> {
        self.map_err(|source| RunError::Numerical { stage, source })
    }
}

/// Wall-clock seconds per stage, in the order the stages ran.
#[derive(Debug, Default, Clone, Serialize)]
pub struct Clock {
    pub stages: Vec<Timing>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

impl Clock {
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.stages.push(Timing {
            stage: stage.into(),
            seconds: t0.elapsed().as_secs_f64(),
        });
        out
    }
}

#[derive(Parser)]
#[command(name = "plurikit", version, about = "Equilibrium potentials and Bergman kernel experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Equilibrium potential, contact set and envelope cross-checks.
    Envelope(RunArgs),
    /// Gram matrices, Bergman functions and the mass identity.
    Bergman(RunArgs),
    /// L1 and sup convergence, decay and metric distance over the levels.
    Converge(RunArgs),
    /// Normalised dimensions against the equilibrium mass.
    Volume(RunArgs),
    /// First expansion coefficient by Richardson pairs.
    Expansion(RunArgs),
    /// Tchebishev constant estimates.
    Capacity(RunArgs),
    /// Off-diagonal concentration of the kernel (chart weights).
    Offdiag(RunArgs),
    /// Print the fully defaulted configuration without computing.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; overrides `workers` in the config.
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    workers: Option<u16>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Also write the echo to `<out>/config.toml`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    tables: Vec<String>,
    notes: &'a [String],
    timings: &'a [Timing],
    config: &'a Config,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let (command, a) = match cli.command {
        Cmd::Validate(v) => return validate(&v.config, v.out.as_deref()),
        Cmd::Envelope(a) => (Command::Envelope, a),
        Cmd::Bergman(a) => (Command::Bergman, a),
        Cmd::Converge(a) => (Command::Converge, a),
        Cmd::Volume(a) => (Command::Volume, a),
        Cmd::Expansion(a) => (Command::Expansion, a),
        Cmd::Capacity(a) => (Command::Capacity, a),
        Cmd::Offdiag(a) => (Command::Offdiag, a),
    };
    let mut cfg = match Config::load(&a.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_USAGE;
        }
    };
    if let Some(w) = a.workers {
        cfg.workers = w as usize;
    }
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    match execute(command, &cfg, &a.out) {
        Ok(outcome) => {
            print!("{}", outcome.summary());
            if outcome.pass() {
                EXIT_PASS
            } else {
                EXIT_GATE
            }
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn validate(path: &Path, out: Option<&Path>) -> i32 {
    let cfg = match Config::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_USAGE;
        }
    };
    let echo = cfg.echo();
    print!("{echo}");
    if let Some(dir) = out {
        if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join("config.toml"), &echo)) {
            eprintln!("cannot write output: {e}");
            return EXIT_USAGE;
        }
    }
    EXIT_PASS
}

/// Runs `command` on a pool of `cfg.workers` threads and writes every
/// artifact into `out`. The manifest is written even when a numerical
/// stage fails.
pub fn execute(command: Command, cfg: &Config, out: &Path) -> Result<Outcome, RunError> {
    std::fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    let mut clock = Clock::default();
    let result = pool.install(|| commands::run_command(command, cfg, &mut clock));
    let (status, error, outcome) = match &result {
        Ok(o) if o.pass() => ("pass", None, Some(o)),
        Ok(o) => ("gate failure", None, Some(o)),
        Err(e) => ("error", Some(e.to_string()), None),
    };
    let empty = Vec::new();
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: command.name(),
        status,
        error,
        tables: outcome.map_or(Vec::new(), |o| o.tables.iter().map(Table::file_name).collect()),
        notes: outcome.map_or(&empty, |o| &o.notes),
        timings: &clock.stages,
        config: cfg,
    };
    let text = toml::to_string(&manifest).map_err(|e| std::io::Error::other(e.to_string()))?;
    std::fs::write(out.join("manifest.toml"), text)?;
    let outcome = result?;
    for t in &outcome.tables {
        t.write(out)?;
    }
    std::fs::write(out.join("summary.txt"), outcome.summary())?;
    Ok(outcome)
}
