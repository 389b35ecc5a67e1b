//! Layered run configuration: defaults < file < environment < flags.
//!
//! A config file is TOML. `seed` and `out_dir` may sit at the top level and
//! apply to every subcommand; everything else lives in a table named after
//! the subcommand. Environment variables are `ROBMAINT_SEED`,
//! `ROBMAINT_OUT_DIR` and `ROBMAINT_<SUBCOMMAND>_<KEY>`, their values parsed
//! as TOML where possible and taken as strings otherwise.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

const ENV_PREFIX: &str = "ROBMAINT_";
const GLOBAL_KEYS: [&str; 2] = ["seed", "out_dir"];

/// Bad input from the user; the process exits with status 1.
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

fn to_table<T: Serialize>(value: &T) -> anyhow::Result<Table> {
    match Value::try_from(value)? {
        Value::Table(t) => Ok(t),
        _ => Err(invalid("configuration must be a table")),
    }
}

fn parse_env_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Layers one subcommand's settings and deserializes them into `T`.
pub fn resolve<T, F>(
    subcommand: &str,
    file: Option<&Path>,
    env: impl IntoIterator<Item = (String, String)>,
    flags: &F,
) -> anyhow::Result<T>
where
    T: Default + Serialize + DeserializeOwned,
    F: Serialize,
{
    let mut merged = to_table(&T::default())?;

    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        let mut doc: Table = text
            .parse()
            .map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
        for key in GLOBAL_KEYS {
            if let Some(v) = doc.remove(key) {
                merged.insert(key.into(), v);
            }
        }
        match doc.remove(subcommand) {
            Some(Value::Table(section)) => merged.extend(section),
            Some(_) => {
                return Err(invalid(format!(
                    "config {}: `{subcommand}` must be a table",
                    path.display()
                )))
            }
            None => {}
        }
    }

    let scoped = format!("{ENV_PREFIX}{}_", subcommand.to_uppercase());
    for (name, raw) in env {
        let key = if let Some(k) = name.strip_prefix(&scoped) {
            k.to_lowercase()
        } else if let Some(k) = name
            .strip_prefix(ENV_PREFIX)
            .filter(|k| GLOBAL_KEYS.contains(&k.to_lowercase().as_str()))
        {
            k.to_lowercase()
        } else {
            continue;
        };
        merged.insert(key, parse_env_value(&raw));
    }

    merged.extend(to_table(flags)?);
    Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| invalid(format!("{subcommand} configuration: {}", e.message())))
}

/// Everything needed to rerun a subcommand: pass the file back with
/// `--config`.
#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    seed: u64,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

pub fn manifest_path(out_dir: &Path, subcommand: &str) -> PathBuf {
    out_dir.join(format!("{subcommand}.manifest.toml"))
}

pub fn write_manifest<T: Serialize>(
    out_dir: &Path,
    subcommand: &str,
    seed: u64,
    resolved: &T,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
) -> anyhow::Result<PathBuf> {
    let mut section = to_table(resolved)?;
    let mut doc = Table::new();
    for key in GLOBAL_KEYS {
        if let Some(v) = section.remove(key) {
            doc.insert(key.into(), v);
        }
    }
    let meta = Manifest {
        tool: "robmaint",
        version: env!("CARGO_PKG_VERSION"),
        subcommand,
        seed,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    doc.insert("manifest".into(), Value::Table(to_table(&meta)?));
    doc.insert(subcommand.into(), Value::Table(section));
    let path = manifest_path(out_dir, subcommand);
    std::fs::write(&path, toml::to_string(&doc)?)?;
    Ok(path)
}
