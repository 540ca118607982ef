//! `--config FILE`: flat `key = value` lines that stand in for flags.
//!
//! Config entries are spliced in directly after the subcommand name, so any
//! flag given on the command line (parsed later, with self-override on)
//! wins over the file, and the file wins over built-in defaults.

use std::fs;

use clap::{ArgAction, Command};

use crate::error::{CliError, CliResult};

/// Returns `argv` with config-file entries expanded into flags.
pub fn expand(argv: Vec<String>, cmd: &Command) -> CliResult<Vec<String>> {
    let Some(sub_pos) = argv.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 1) else {
        return Ok(argv);
    };
    let Some(sub) = cmd.find_subcommand(&argv[sub_pos]) else {
        return Ok(argv);
    };
    let Some(path) = config_path(&argv[sub_pos + 1..]) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).map_err(|e| CliError::Config {
        path: path.clone(),
        message: e.to_string(),
        io: true,
    })?;
    let injected = parse(&text, sub).map_err(|message| CliError::Config {
        path,
        message,
        io: false,
    })?;
    let mut out = argv[..=sub_pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&argv[sub_pos + 1..]);
    Ok(out)
}

fn config_path(args: &[String]) -> Option<String> {
    let mut found = None;
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--" {
            break;
        }
        if a == "--config" {
            found = it.next().cloned();
        } else if let Some(v) = a.strip_prefix("--config=") {
            found = Some(v.to_string());
        }
    }
    found
}

fn parse(text: &str, sub: &Command) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let value = value.trim();
        if key == "config" {
            return Err(format!("line {}: nested config files are not supported", n + 1));
        }
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| format!("line {}: unknown key '{key}' for '{}'", n + 1, sub.get_name()))?;
        match arg.get_action() {
            ArgAction::SetTrue => match value {
                "true" => out.push(format!("--{key}")),
                "false" => {}
                _ => return Err(format!("line {}: '{key}' takes true or false, got '{value}'", n + 1)),
            },
            _ => out.push(format!("--{key}={value}")),
        }
    }
    Ok(out)
}
