//! `--config FILE` support.
//!
//! The file is a flat TOML table whose keys are the long flag names of the
//! chosen subcommand. Entries for flags that are not on the command line are
//! spliced into argv right after the subcommand path.

use std::ffi::OsString;
use std::path::Path;

use clap::CommandFactory;

use crate::args::Cli;
use crate::CliError;

/// Returns argv with any `--config FILE` replaced by the file's flags.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config = None;
    let mut iter = argv.into_iter();
    while let Some(arg) = iter.next() {
        if arg == "--" {
            rest.push(arg);
            rest.extend(iter.by_ref());
            break;
        }
        let text = arg.to_string_lossy();
        if text == "--config" {
            let path = iter
                .next()
                .ok_or_else(|| CliError::Usage("--config needs a file argument".into()))?;
            config = Some(path);
        } else if let Some(path) = text.strip_prefix("--config=") {
            config = Some(OsString::from(path));
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };

    let root = Cli::command();
    let mut cmd = &root;
    let mut at = 1;
    while let Some(sub) = rest
        .get(at)
        .and_then(|a| a.to_str())
        .and_then(|name| cmd.find_subcommand(name))
    {
        cmd = sub;
        at += 1;
    }
    if cmd.has_subcommands() {
        // No complete subcommand: let clap report the usage problem.
        return Ok(rest);
    }
    let given = given_flags(&rest[at..], cmd);
    let flags = load(Path::new(&path), cmd, &given)?;
    rest.splice(at..at, flags);
    Ok(rest)
}

/// Long names of the flags present in `args`.
fn given_flags(args: &[OsString], cmd: &clap::Command) -> Vec<String> {
    let mut out = Vec::new();
    for a in args.iter().filter_map(|a| a.to_str()) {
        if let Some(long) = a.strip_prefix("--") {
            out.push(long.split('=').next().unwrap_or(long).to_string());
        } else if let Some(c) = a.strip_prefix('-').and_then(|s| s.chars().next()) {
            if let Some(long) = cmd
                .get_arguments()
                .find(|arg| arg.get_short() == Some(c))
                .and_then(|arg| arg.get_long())
            {
                out.push(long.to_string());
            }
        }
    }
    out
}

fn load(path: &Path, cmd: &clap::Command, given: &[String]) -> Result<Vec<OsString>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (key, value) in table {
        let arg = cmd
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && key != "config")
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "config {}: unknown key '{key}' for `{}`",
                    path.display(),
                    cmd.get_name()
                ))
            })?;
        if given.contains(&key) {
            continue;
        }
        let flag = format!("--{key}");
        let takes_value = arg.get_action().takes_values();
        match value {
            toml::Value::Boolean(b) if !takes_value => {
                if b {
                    out.push(flag.into());
                }
            }
            toml::Value::Array(items) => {
                let parts: Result<Vec<String>, CliError> =
                    items.iter().map(|v| scalar(path, &key, v)).collect();
                out.push(format!("{flag}={}", parts?.join(",")).into());
            }
            other => out.push(format!("{flag}={}", scalar(path, &key, &other)?).into()),
        }
    }
    Ok(out)
}

fn scalar(path: &Path, key: &str, value: &toml::Value) -> Result<String, CliError> {
    match value {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        _ => Err(CliError::Usage(format!(
            "config {}: key '{key}' must be a string, number, boolean or list of those",
            path.display()
        ))),
    }
}
