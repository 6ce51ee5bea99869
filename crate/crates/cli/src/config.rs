//! Config files, flag precedence and run manifests.
//!
//! A config file is TOML. Top-level `seed`, `threads` and `out` set the global
//! options; a table named after the subcommand (`[train]`, `[gen-data]`, ...)
//! sets that subcommand's flags, keyed by the long flag name. Flags given on
//! the command line override the file.
//!
//! Every run writes `manifest.toml` into the output directory. It has the same
//! layout as a config file plus `command`, `version`, `exit-code` and
//! `outputs`, which the loader ignores, so `--config manifest.toml` replays it.

use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory};
use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

use crate::{Cli, CliError, CliResult};

const MANIFEST: &str = "manifest.toml";
const IGNORED: [&str; 4] = ["command", "version", "exit-code", "outputs"];
const GLOBAL: [&str; 3] = ["seed", "threads", "out"];

pub fn load(path: &Path) -> CliResult<Table> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    text.parse::<Table>()
        .map_err(|e| CliError::usage(format!("bad config {}: {e}", path.display())))
}

fn from_cli(top: &ArgMatches, sub: &ArgMatches, id: &str) -> bool {
    let cl = |m: &ArgMatches| matches!(m.try_get_raw(id), Ok(Some(_))) && m.value_source(id) == Some(ValueSource::CommandLine);
    cl(top) || cl(sub)
}

#[derive(Debug, Clone, Serialize)]
pub struct Global {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub out: PathBuf,
}

impl Global {
    pub fn resolve(cli: &Cli, top: &ArgMatches, sub: &ArgMatches, file: Option<&Table>) -> CliResult<Self> {
        let mut g = Global {
            seed: cli.seed,
            threads: cli.threads,
            out: cli.out.clone(),
        };
        let Some(file) = file else { return Ok(g) };
        let subs: Vec<String> = Cli::command().get_subcommands().map(|c| c.get_name().to_string()).collect();
        for (k, v) in file {
            if IGNORED.contains(&k.as_str()) || subs.contains(k) {
                continue;
            }
            if !GLOBAL.contains(&k.as_str()) {
                return Err(CliError::usage(format!("unknown config key '{k}'")));
            }
            if from_cli(top, sub, k) {
                continue;
            }
            let bad = || CliError::usage(format!("config key '{k}' has the wrong type"));
            match k.as_str() {
                "seed" => g.seed = v.as_integer().and_then(|i| u64::try_from(i).ok()).ok_or_else(bad)?,
                "threads" => {
                    g.threads = Some(v.as_integer().and_then(|i| usize::try_from(i).ok()).ok_or_else(bad)?)
                }
                _ => g.out = PathBuf::from(v.as_str().ok_or_else(bad)?),
            }
        }
        Ok(g)
    }
}

/// Applies the config section to the parsed flags and records the result in
/// the manifest.
pub fn resolve<T: Serialize + DeserializeOwned>(
    args: &T,
    sub: &ArgMatches,
    name: &str,
    section: Option<&Value>,
    run: &mut Run,
) -> CliResult<T> {
    let mut table = Table::try_from(args).map_err(|e| CliError::usage(e.to_string()))?;
    if let Some(section) = section {
        let section = section
            .as_table()
            .ok_or_else(|| CliError::usage(format!("config entry '{name}' must be a table")))?;
        let cmd = Cli::command();
        let known: Vec<String> = cmd
            .find_subcommand(name)
            .expect("known subcommand")
            .get_arguments()
            .map(|a| a.get_id().as_str().replace('_', "-"))
            .collect();
        for (k, v) in section {
            if !known.contains(k) {
                return Err(CliError::usage(format!("unknown key '{k}' in [{name}]")));
            }
            if !from_cli(sub, sub, &k.replace('-', "_")) {
                table.insert(k.clone(), v.clone());
            }
        }
    }
    let resolved: T = table
        .clone()
        .try_into()
        .map_err(|e| CliError::usage(format!("bad value in [{name}]: {e}")))?;
    run.config = Some(Table::try_from(&resolved).map_err(|e| CliError::usage(e.to_string()))?);
    Ok(resolved)
}

pub struct Run {
    pub command: String,
    pub global: Global,
    pub config: Option<Table>,
    outputs: Vec<String>,
}

impl Run {
    pub fn new(command: &str, global: Global) -> Self {
        Self {
            command: command.to_string(),
            global,
            config: None,
            outputs: Vec::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.global.seed
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.global.out.join(name)
    }

    pub fn write(&mut self, name: &str, text: &str) -> CliResult<PathBuf> {
        let p = self.path(name);
        std::fs::write(&p, text).map_err(|e| CliError::usage(format!("cannot write {}: {e}", p.display())))?;
        self.outputs.push(name.to_string());
        Ok(p)
    }

    pub fn finish(&self, exit_code: u8) -> CliResult<()> {
        let mut t = Table::new();
        t.insert("command".into(), Value::from(self.command.clone()));
        t.insert("version".into(), Value::from(env!("CARGO_PKG_VERSION")));
        t.insert("exit-code".into(), Value::from(i64::from(exit_code)));
        let g = Table::try_from(&self.global).map_err(|e| CliError::usage(e.to_string()))?;
        t.extend(g);
        if let Some(c) = &self.config {
            t.insert(self.command.clone(), Value::Table(c.clone()));
        }
        t.insert(
            "outputs".into(),
            Value::Array(self.outputs.iter().cloned().map(Value::from).collect()),
        );
        let text = toml::to_string(&t).map_err(|e| CliError::usage(e.to_string()))?;
        let p = self.path(MANIFEST);
        std::fs::write(&p, text).map_err(|e| CliError::usage(format!("cannot write {}: {e}", p.display())))
    }
}
