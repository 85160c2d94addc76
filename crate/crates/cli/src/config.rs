//! `--config FILE` support.
//!
//! The file is INI. Keys under `[defaults]` apply to every subcommand that
//! accepts them; keys under a section named after the subcommand apply to
//! that subcommand only. Values are spliced into the argument list as if
//! typed, so flags given on the command line always win.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Command;
use ini::Ini;

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

fn user_set(args: &[OsString], long: &str) -> bool {
    let flag = format!("--{long}");
    let prefix = format!("--{long}=");
    args.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.starts_with(&prefix)
    })
}

fn truthy(v: &str) -> bool {
    matches!(
        v.trim().to_ascii_lowercase().as_str(),
        "1" | "true" | "yes" | "on"
    )
}

/// Returns `args` with config-file values inserted after the subcommand.
pub fn expand_args(cmd: &Command, args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let ini = Ini::load_from_file(&path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let Some(sub_pos) = args
        .iter()
        .skip(1)
        .position(|a| cmd.find_subcommand(a.to_string_lossy().as_ref()).is_some())
        .map(|p| p + 1)
    else {
        return Ok(args);
    };
    let sub_name = args[sub_pos].to_string_lossy().into_owned();
    let sub = cmd.find_subcommand(&sub_name).expect("found above");

    let mut pairs: Vec<(String, String)> = Vec::new();
    for section in [Some("defaults"), Some(sub_name.as_str())] {
        if let Some(props) = ini.section(section) {
            for (k, v) in props.iter() {
                let key = k.trim().replace('_', "-");
                pairs.retain(|(existing, _)| *existing != key);
                pairs.push((key, v.trim().to_string()));
            }
        }
    }

    let mut injected = Vec::new();
    for (key, value) in pairs {
        if key == "config" || user_set(&args, &key) {
            continue;
        }
        let arg = sub
            .get_arguments()
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()));
        let Some(arg) = arg else {
            log::debug!("config key {key} does not apply to {sub_name}");
            continue;
        };
        if arg.get_action().takes_values() {
            injected.push(OsString::from(format!("--{key}")));
            injected.push(OsString::from(value));
        } else if truthy(&value) {
            injected.push(OsString::from(format!("--{key}")));
        }
    }
    let mut out = args;
    let tail = out.split_off(sub_pos + 1);
    out.extend(injected);
    out.extend(tail);
    Ok(out)
}
