//! `connectikit <gen-data|train|connect|report|analyze>`.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numeric failure,
//! 4 violated theorem precondition.

mod analyze;
mod config;
mod connect;
mod gen_data;
mod report;
mod svg;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::config::{resolve, Run};

#[derive(Parser, Debug)]
#[command(name = "connectikit", version, about = "Mode connectivity tooling for two-layer ReLU networks")]
pub(crate) struct Cli {
    /// Master seed; every random draw comes from a named substream of it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML file of `key = value` settings; explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Write a dataset: teacher regression data, the d=1 toy, or the finite construction.
    GenData(gen_data::Args),
    /// Train a two-layer net with one of the four optimizers.
    Train(train::Args),
    /// Build and profile a path between two checkpoints.
    Connect(connect::Args),
    /// Render SVG charts from profile CSVs.
    Report(report::Args),
    /// Arrangement and construction analyses.
    Analyze(analyze::Args),
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self { code: 2, msg: msg.into() }
    }
}

impl From<connectikit::Error> for CliError {
    fn from(e: connectikit::Error) -> Self {
        let code = if e.is_precondition() || matches!(e, connectikit::Error::AmbiguousSign { .. }) {
            4
        } else if e.is_numeric() {
            3
        } else {
            2
        };
        Self { code, msg: e.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn dispatch(cli: Cli, matches: &ArgMatches) -> CliResult<()> {
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let file = cli.config.as_deref().map(config::load).transpose()?;
    let global = config::Global::resolve(&cli, matches, sub, file.as_ref())?;
    if let Some(n) = global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot set thread count: {e}")))?;
    }
    std::fs::create_dir_all(&global.out)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", global.out.display())))?;
    let section = file.as_ref().and_then(|f| f.get(name)).cloned();
    let section = section.as_ref();
    let mut run = Run::new(name, global);
    let res = match cli.cmd {
        Cmd::GenData(a) => resolve(&a, sub, name, section, &mut run).and_then(|a| gen_data::run(&a, &mut run)),
        Cmd::Train(a) => resolve(&a, sub, name, section, &mut run).and_then(|a| train::run(&a, &mut run)),
        Cmd::Connect(a) => resolve(&a, sub, name, section, &mut run).and_then(|a| connect::run(&a, &mut run)),
        Cmd::Report(a) => resolve(&a, sub, name, section, &mut run).and_then(|a| report::run(&a, &mut run)),
        Cmd::Analyze(a) => resolve(&a, sub, name, section, &mut run).and_then(|a| analyze::run(&a, &mut run)),
    };
    let code = res.as_ref().map_or_else(|e| e.code, |_| 0);
    run.finish(code)?;
    res
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match dispatch(cli, &matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}
