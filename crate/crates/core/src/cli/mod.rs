//! The `fima` command line.
//!
//! Every subcommand takes `--config FILE` and any number of
//! `--set key=value`; the path flags are shorthands for the matching keys.
//! Failures print one line `E_<KIND>: message` on stderr and exit with
//! 2 (input), 3 (solver) or 4 (module).

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::FimaError;

pub use commands::{
    cmd_bench, cmd_make_synthetic, cmd_solve_blind, cmd_solve_nonblind, BenchRow, RunSummary, BENCH_HEADER,
};
pub use config::{split_pair, ExperimentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Solver,
    Module,
}

impl ErrorKind {
    pub fn code(self) -> &'static str {
        match self {
            ErrorKind::Input => "E_INPUT",
            ErrorKind::Solver => "E_SOLVER",
            ErrorKind::Module => "E_MODULE",
        }
    }

    pub fn exit_status(self) -> i32 {
        match self {
            ErrorKind::Input => 2,
            ErrorKind::Solver => 3,
            ErrorKind::Module => 4,
        }
    }
}

pub fn classify(err: &FimaError) -> ErrorKind {
    match err {
        FimaError::ModuleFailure { .. } => ErrorKind::Module,
        FimaError::EstimationFailure(_) | FimaError::SubproblemFailure(_) | FimaError::DimensionMismatch { .. } => {
            ErrorKind::Solver
        }
        FimaError::InvalidArgument(_)
        | FimaError::Unsupported(_)
        | FimaError::InvalidConfig(_)
        | FimaError::Parse(_)
        | FimaError::Io(_) => ErrorKind::Input,
    }
}

#[derive(Debug, Parser)]
#[command(name = "fima", version, about = "Modular proximal iterations for image deconvolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Deblur an image with a known kernel.
    SolveNonblind(Common),
    /// Estimate the blur kernel of an image.
    SolveBlind(Common),
    /// Compare schemes and modules on synthetic instances.
    Bench(Common),
    /// Write a seeded synthetic (z_true, b_true, y) triple.
    MakeSynthetic(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    kernel: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    kernel_truth: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, FimaError> {
        let mut overrides = self.set.clone();
        let paths = [
            ("input", &self.input),
            ("kernel", &self.kernel),
            ("truth", &self.truth),
            ("kernel_truth", &self.kernel_truth),
            ("out", &self.out),
        ];
        for (key, p) in paths {
            if let Some(p) = p {
                overrides.push(format!("{key}={}", p.display()));
            }
        }
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        ExperimentConfig::load(self.config.as_deref(), &overrides)
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn dispatch(command: Command) -> Result<String, FimaError> {
    match command {
        Command::SolveNonblind(c) => {
            let cfg = c.load()?;
            let s = cmd_solve_nonblind(&cfg)?;
            Ok(format!("{} iterations, {} accepted, wrote {}", s.iterations, s.accepts, cfg.out.display()))
        }
        Command::SolveBlind(c) => {
            let cfg = c.load()?;
            let s = cmd_solve_blind(&cfg)?;
            let ks = s.kernel_similarity.map(|v| format!(", KS {v:.4}")).unwrap_or_default();
            Ok(format!("{} sweeps{ks}, wrote {}", s.iterations, cfg.out.display()))
        }
        Command::Bench(c) => {
            let cfg = c.load()?;
            let rows = cmd_bench(&cfg)?;
            let failed = rows.iter().filter(|r| r.failed.is_some()).count();
            Ok(format!("{} cells ({failed} failed), wrote {}", rows.len(), cfg.out.join("bench.csv").display()))
        }
        Command::MakeSynthetic(c) => {
            let cfg = c.load()?;
            cmd_make_synthetic(&cfg)?;
            Ok(format!("wrote {}", cfg.out.display()))
        }
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return if e.kind() == K::DisplayHelpOnMissingArgumentOrSubcommand { 2 } else { 0 };
            }
            let msg = e.to_string();
            eprintln!("{}: {}", ErrorKind::Input.code(), one_line(msg.lines().next().unwrap_or("")));
            return ErrorKind::Input.exit_status();
        }
    };
    match dispatch(cli.command) {
        Ok(msg) => {
            println!("{msg}");
            0
        }
        Err(e) => {
            let kind = classify(&e);
            eprintln!("{}: {}", kind.code(), one_line(&e.to_string()));
            kind.exit_status()
        }
    }
}
