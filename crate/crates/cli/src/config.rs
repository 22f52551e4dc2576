//! `key = value` run files. Each key names a long flag of the chosen
//! subcommand; flags given on the command line win.

use std::ffi::OsString;

use crate::CliError;

/// Parses `text` into flag arguments. `true` and `false` toggle switches;
/// `#` starts a comment.
pub fn config_args(text: &str) -> Result<Vec<OsString>, CliError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", n + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key == "config" {
            return Err(CliError::Usage(format!("config line {}: invalid key `{key}`", n + 1)));
        }
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            v => {
                out.push(format!("--{key}").into());
                out.push(v.into());
            }
        }
    }
    Ok(out)
}

/// Argument list with config-file flags placed before the user's own, so
/// later (command-line) occurrences override them.
pub fn merge(argv: &[OsString], subcommand_index: usize, from_file: Vec<OsString>) -> Vec<OsString> {
    let mut merged = argv[..=subcommand_index].to_vec();
    merged.extend(from_file);
    merged.extend_from_slice(&argv[subcommand_index + 1..]);
    merged
}
