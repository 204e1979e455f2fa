//! Merging of the optional `key = value` config file into the command line.
//!
//! Config entries are appended as flags for every argument that was not given
//! on the command line, so flags win over the file and the file wins over the
//! built-in defaults.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::Path;

use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory, FromArgMatches};

use crate::Cli;

pub enum ParseFailure {
    Clap(clap::Error),
    Config(String),
}

impl From<clap::Error> for ParseFailure {
    fn from(e: clap::Error) -> Self {
        ParseFailure::Clap(e)
    }
}

pub fn parse(mut args: Vec<OsString>) -> Result<Cli, ParseFailure> {
    let matches = Cli::command().try_get_matches_from(&args)?;
    let cli = Cli::from_arg_matches(&matches)?;
    let Some(path) = cli.config.as_deref() else {
        return Ok(cli);
    };
    let entries = read_config(path)?;
    let (sub_name, sub_matches) = matches
        .subcommand()
        .expect("clap requires a subcommand");
    args.extend(config_args(&entries, sub_name, &matches, sub_matches)?);
    let matches = Cli::command().try_get_matches_from(&args)?;
    Ok(Cli::from_arg_matches(&matches)?)
}

/// `key = value` lines; blank lines and `#` comments are skipped. Keys are
/// long flag names, with `_` accepted for `-`.
pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>, ParseFailure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ParseFailure::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, ParseFailure> {
    let mut entries = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ParseFailure::Config(format!(
                "config line {}: expected `key = value`, found `{line}`",
                no + 1
            )));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(ParseFailure::Config(format!("config line {}: empty key", no + 1)));
        }
        if entries.insert(key.clone(), value).is_some() {
            return Err(ParseFailure::Config(format!("config key `{key}` given twice")));
        }
    }
    Ok(entries)
}

fn config_args(
    entries: &BTreeMap<String, String>,
    sub_name: &str,
    top: &ArgMatches,
    sub: &ArgMatches,
) -> Result<Vec<OsString>, ParseFailure> {
    let root = Cli::command();
    let sub_cmd = root
        .find_subcommand(sub_name)
        .expect("matched subcommand exists");
    let mut out = Vec::new();
    for (key, value) in entries {
        if key == "config" {
            return Err(ParseFailure::Config("config files cannot include other config files".into()));
        }
        let named = |a: &&clap::Arg| {
            a.get_long() == Some(key.as_str())
                || a.get_all_aliases().is_some_and(|al| al.contains(&key.as_str()))
        };
        let (arg, from_cli) = if let Some(a) = sub_cmd.get_arguments().find(named) {
            (a, sub.value_source(a.get_id().as_str()) == Some(ValueSource::CommandLine))
        } else if let Some(a) = root.get_arguments().find(named) {
            (a, top.value_source(a.get_id().as_str()) == Some(ValueSource::CommandLine))
        } else {
            return Err(ParseFailure::Config(format!(
                "unknown config key `{key}` for `{sub_name}`"
            )));
        };
        if from_cli {
            continue;
        }
        let flag = format!("--{key}");
        if arg.get_action().takes_values() {
            out.push(flag.into());
            out.push(value.into());
        } else {
            match value.as_str() {
                "true" | "yes" | "1" => out.push(flag.into()),
                "false" | "no" | "0" => {}
                other => {
                    return Err(ParseFailure::Config(format!(
                        "config key `{key}` expects true or false, found `{other}`"
                    )))
                }
            }
        }
    }
    Ok(out)
}
