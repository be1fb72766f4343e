//! Key-value config files merged under command-line flags.
//!
//! Each non-comment line is `key = value` (or `key value`); keys are flag
//! names without the leading dashes. The entries are inserted right after
//! the subcommand so that flags given on the command line, which come later
//! and override earlier occurrences, take precedence.

use std::ffi::OsString;
use std::path::Path;

use crate::error::{BenchError, Result};

/// Flags that take no value; `true` enables them, `false` drops the entry.
pub const SWITCHES: &[&str] = &["project", "header"];

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = match line.split_once('=') {
            Some((k, v)) => (k.trim(), v.trim()),
            None => match line.split_once(char::is_whitespace) {
                Some((k, v)) => (k.trim(), v.trim()),
                None => (line, ""),
            },
        };
        let key = k.trim_start_matches("--");
        if key.is_empty() || key == "config" {
            return Err(BenchError::Parse {
                line: i as u64 + 1,
                msg: format!("bad config entry {raw:?}"),
            });
        }
        out.push((key.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Turns config entries into flag arguments.
pub fn config_args(entries: &[(String, String)]) -> Result<Vec<String>> {
    let mut args = Vec::new();
    for (k, v) in entries {
        if SWITCHES.contains(&k.as_str()) {
            match v.as_str() {
                "" | "true" | "yes" | "1" => args.push(format!("--{k}")),
                "false" | "no" | "0" => {}
                _ => return Err(BenchError::Config(format!("{k} expects true or false, got {v:?}"))),
            }
        } else {
            args.push(format!("--{k}"));
            args.push(v.clone());
        }
    }
    Ok(args)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(rest.into());
        }
    }
    None
}

/// Expands `--config <file>` into flags placed after the subcommand name.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path))?;
    let extra = config_args(&parse_config(&text)?)?;
    let split = args.len().min(2);
    let mut out: Vec<OsString> = args[..split].to_vec();
    out.extend(extra.into_iter().map(OsString::from));
    out.extend_from_slice(&args[split..]);
    Ok(out)
}
