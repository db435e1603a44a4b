//! Experiment configuration: built-in defaults, overlaid by an optional JSON
//! file, overlaid by `--set dotted.path=value` flags.

use std::fs;
use std::path::Path;

use osr_core::experiment::ExperimentConfig;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Applies one `a.b.c=value` override. The value is parsed as JSON when
/// possible and taken as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> CliResult<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got '{assignment}'")))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Usage(format!("malformed key path '{path}'")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));

    let mut node = root;
    for (depth, key) in keys.iter().enumerate() {
        let map: &mut Map<String, Value> = node.as_object_mut().ok_or_else(|| {
            CliError::Config(format!("'{}' is not an object", keys[..depth].join(".")))
        })?;
        if depth + 1 == keys.len() {
            map.insert(key.to_string(), value);
            return Ok(());
        }
        node = map.get_mut(*key).ok_or_else(|| {
            CliError::Config(format!(
                "unknown configuration key '{}'",
                keys[..=depth].join(".")
            ))
        })?;
    }
    unreachable!("key path is non-empty")
}

pub fn load(path: Option<&Path>, overrides: &[String]) -> CliResult<ExperimentConfig> {
    let mut value = serde_json::to_value(ExperimentConfig::default()).expect("config serialises");
    if let Some(path) = path {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let file: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if !file.is_object() {
            return Err(CliError::Config(format!(
                "{}: expected a JSON object",
                path.display()
            )));
        }
        merge(&mut value, file);
    }
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let config: ExperimentConfig =
        serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
    config.validate()?;
    Ok(config.resolved())
}

/// The resolved configuration as embedded in every artifact.
pub fn echo(config: &ExperimentConfig) -> Value {
    serde_json::to_value(config).expect("config serialises")
}
