//! `key=value` config files and run manifests.
//!
//! A config file holds one option per line, named like its long flag
//! (`ratio = 0.25`, `hop_prob = 0.5`); `#` starts a comment. Boolean flags
//! take `true` or `false`. Options given on the command line override the
//! file. A manifest written by any command is itself a valid config file.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::Path;

use clap::ArgMatches;

use crate::error::CliError;

/// Parses config text into `(key, value)` pairs with keys normalised to
/// flag spelling.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value, got {raw:?}", n + 1)))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", n + 1)));
        }
        pairs.push((key, value.trim().to_string()));
    }
    Ok(pairs)
}

/// Splices `--config FILE` contents into the argument list, directly after
/// the subcommand so explicit flags take precedence.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let pos = args
        .iter()
        .position(|a| a == "--config" || a.to_str().is_some_and(|s| s.starts_with("--config=")));
    let Some(pos) = pos else {
        return Ok(args);
    };
    let (path, consumed) = match args[pos].to_str().and_then(|s| s.strip_prefix("--config=")) {
        Some(p) => (OsString::from(p), 1),
        None => match args.get(pos + 1) {
            Some(p) => (p.clone(), 2),
            None => return Err(CliError::Usage("--config needs a file".into())),
        },
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let Some(sub) = args.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')) else {
        return Err(CliError::Usage("--config given without a subcommand".into()));
    };
    let sub = sub + 1;
    let name = args[sub].to_string_lossy().into_owned();

    let mut injected = Vec::new();
    for (key, value) in parse_config(&text)? {
        if key == "command" {
            if value != name {
                return Err(CliError::Usage(format!(
                    "config {} is for `{value}`, not `{name}`",
                    path.display()
                )));
            }
            continue;
        }
        match value.as_str() {
            "true" => injected.push(OsString::from(format!("--{key}"))),
            "false" => {}
            _ => {
                injected.push(OsString::from(format!("--{key}")));
                injected.push(OsString::from(value));
            }
        }
    }

    let mut out = Vec::with_capacity(args.len() + injected.len());
    for (i, a) in args.into_iter().enumerate() {
        if i >= pos && i < pos + consumed {
            continue;
        }
        out.push(a);
        if i == sub {
            out.append(&mut injected);
        }
    }
    Ok(out)
}

/// Renders every resolved option of a subcommand as a config file.
pub fn manifest(command: &clap::Command, matches: &ArgMatches) -> String {
    let mut text = format!("command={}\n", command.get_name());
    for arg in command.get_arguments() {
        let id = arg.get_id().as_str();
        let Some(long) = arg.get_long() else { continue };
        if long == "config" {
            continue;
        }
        if let Ok(Some(values)) = matches.try_get_raw(id) {
            let joined: Vec<String> = values.map(|v| v.to_string_lossy().into_owned()).collect();
            let _ = writeln!(text, "{long}={}", joined.join(","));
        }
    }
    text
}
