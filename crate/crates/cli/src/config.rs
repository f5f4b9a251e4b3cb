//! `--config` support: a flat JSON object whose keys are long flag names.
//! Its entries are spliced in right after the subcommand so that flags given
//! on the command line, which come later, override them.

use crate::error::{CliError, CliResult};
use serde_json::Value;
use std::ffi::OsString;
use std::path::PathBuf;

const SUBCOMMANDS: [&str; 5] = ["synth", "train", "detect", "eval", "denoise"];

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

/// Converts a config object into flag tokens.
pub fn config_flags(text: &str) -> CliResult<Vec<OsString>> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| CliError::Usage(format!("config is not valid JSON: {e}")))?;
    let Value::Object(map) = value else {
        return Err(CliError::Usage("config must be a JSON object".into()));
    };
    let mut out = Vec::new();
    for (key, v) in map {
        if key == "config" {
            return Err(CliError::Usage("config files cannot nest --config".into()));
        }
        let flag = OsString::from(format!("--{key}"));
        match v {
            Value::Bool(true) => out.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Number(n) => {
                out.push(flag);
                out.push(n.to_string().into());
            }
            Value::String(s) => {
                out.push(flag);
                out.push(s.into());
            }
            Value::Array(_) | Value::Object(_) => {
                return Err(CliError::Usage(format!(
                    "config key '{key}' must be a scalar"
                )));
            }
        }
    }
    Ok(out)
}

/// Returns the argument list with config-file flags inserted.
pub fn expand(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let extra = config_flags(&text)?;
    let at = args
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
        .map_or(args.len(), |i| i + 1);
    let mut out = args[..at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[at..]);
    Ok(out)
}
