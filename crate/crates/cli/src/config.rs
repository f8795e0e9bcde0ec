//! Flat `key = value` run configuration files.
//!
//! A file holds one setting per line; `#` starts a comment. Keys are the long
//! flag names of the subcommand (`num-trees`, `T`, ...), underscores accepted.
//! Lists are comma separated. `true` turns a switch on, `false` leaves it off.
//! Values on the command line take precedence over the file.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("line {}: expected `key = value`, got {raw:?}", i + 1);
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            bail!("line {}: empty key", i + 1);
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn flag_present(args: &[OsString], key: &str) -> bool {
    let long = format!("--{key}");
    let with_eq = format!("--{key}=");
    args.iter().any(|a| {
        let a = a.to_string_lossy();
        a == long || a.starts_with(&with_eq)
    })
}

/// Pulls `--config <file>` out of `args` and splices the file's settings in
/// after the subcommand name, skipping keys already given as flags.
pub fn expand(mut args: Vec<OsString>, commands: &[&str]) -> Result<Vec<OsString>> {
    let Some(pos) = args
        .iter()
        .position(|a| a == "--config" || a.to_string_lossy().starts_with("--config="))
    else {
        return Ok(args);
    };
    let path = match args[pos].to_string_lossy().strip_prefix("--config=") {
        Some(p) => {
            let p = OsString::from(p);
            args.remove(pos);
            p
        }
        None => {
            if pos + 1 >= args.len() {
                bail!("--config needs a file path");
            }
            let p = args.remove(pos + 1);
            args.remove(pos);
            p
        }
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .with_context(|| format!("reading config {}", Path::new(&path).display()))?;
    let entries =
        parse(&text).with_context(|| format!("parsing config {}", Path::new(&path).display()))?;

    let insert_at = args
        .iter()
        .position(|a| commands.iter().any(|c| a == c))
        .map(|i| i + 1)
        .unwrap_or(args.len());
    let mut extra = Vec::new();
    for (key, value) in entries {
        if key == "config" || flag_present(&args, &key) {
            continue;
        }
        match value.as_str() {
            "true" => extra.push(OsString::from(format!("--{key}"))),
            "false" => {}
            _ => {
                extra.push(OsString::from(format!("--{key}")));
                extra.push(OsString::from(value));
            }
        }
    }
    args.splice(insert_at..insert_at, extra);
    Ok(args)
}

/// Renders any flat serializable argument struct as a config file.
pub fn render<T: Serialize>(args: &T) -> Result<String> {
    let value = serde_json::to_value(args)?;
    let serde_json::Value::Object(map) = value else {
        bail!("arguments do not serialize to a map");
    };
    // sorted for stable files
    let map: BTreeMap<String, serde_json::Value> = map.into_iter().collect();
    let mut out = String::new();
    for (key, v) in map {
        let key = key.replace('_', "-");
        let text = match v {
            serde_json::Value::Null => continue,
            serde_json::Value::String(s) => s,
            serde_json::Value::Array(items) => items
                .iter()
                .map(|i| match i {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
            other => other.to_string(),
        };
        out.push_str(&format!("{key} = {text}\n"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parse_skips_comments_and_normalises_keys() {
        let kv = parse("# header\nnum_trees = 50\n\n  taus=0.1,0.9  # trailing\n").unwrap();
        assert_eq!(
            kv,
            vec![
                ("num-trees".into(), "50".into()),
                ("taus".into(), "0.1,0.9".into())
            ]
        );
        assert!(parse("oops\n").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(
            &cfg,
            "seed = 1\nT = 300\nlog-returns = true\ndrop-missing = false\n",
        )
        .unwrap();
        let args = os(&[
            "tsqrf",
            "--config",
            cfg.to_str().unwrap(),
            "simulate",
            "--seed",
            "9",
        ]);
        let out = expand(args, &["simulate"]).unwrap();
        assert_eq!(
            out,
            os(&[
                "tsqrf",
                "simulate",
                "--T",
                "300",
                "--log-returns",
                "--seed",
                "9"
            ])
        );
    }
}
