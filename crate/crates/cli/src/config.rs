//! JSON presets for command flags.
//!
//! A config file is a JSON object. Top-level keys apply to every command that
//! has a flag of that name; an object stored under a command name (for
//! example `"op-sweep"`) applies to that command only and may not contain
//! unknown keys. Flags given on the command line always win; a switch left
//! off on the command line keeps the config value.

use std::path::Path;

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::UsageError;

pub fn load(path: &Path) -> anyhow::Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(UsageError(format!("config {} must hold a JSON object", path.display())).into()),
        Err(e) => Err(UsageError(format!("config {}: {e}", path.display())).into()),
    }
}

fn object<T: Serialize>(v: &T) -> Map<String, Value> {
    match serde_json::to_value(v) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    }
}

/// `flags` with unset fields filled from the config.
pub fn merge<T>(flags: &T, command: &str, config: Option<&Map<String, Value>>) -> anyhow::Result<T>
where
    T: Serialize + DeserializeOwned + Default,
{
    let Some(config) = config else {
        return Ok(serde_json::from_value(Value::Object(object(flags)))?);
    };
    let known = object(&T::default());
    let mut merged = Map::new();
    for (k, v) in config {
        if known.contains_key(k) {
            merged.insert(k.clone(), v.clone());
        }
    }
    match config.get(command) {
        None => {}
        Some(Value::Object(section)) => {
            for (k, v) in section {
                if !known.contains_key(k) {
                    return Err(UsageError(format!("config section {command:?} has unknown key {k:?}")).into());
                }
                merged.insert(k.clone(), v.clone());
            }
        }
        Some(_) => return Err(UsageError(format!("config section {command:?} must be an object")).into()),
    }
    for (k, v) in object(flags) {
        if !v.is_null() && v != Value::Bool(false) {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| UsageError(format!("config for {command}: {e}")).into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;
    use serde_json::json;

    #[derive(Default, Serialize, Deserialize, PartialEq, Debug)]
    struct Opts {
        seed: Option<u64>,
        samples: Option<usize>,
    }

    fn cfg(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn flags_override_config() {
        let c = cfg(json!({"seed": 3, "x": {"samples": 10}}));
        let flags = Opts {
            seed: Some(9),
            samples: None,
        };
        assert_eq!(
            merge(&flags, "x", Some(&c)).unwrap(),
            Opts {
                seed: Some(9),
                samples: Some(10)
            }
        );
    }

    #[test]
    fn top_level_keys_for_other_commands_are_ignored() {
        let c = cfg(json!({"apps": ["matting"], "seed": 4}));
        assert_eq!(merge(&Opts::default(), "x", Some(&c)).unwrap().seed, Some(4));
    }

    #[test]
    fn unknown_section_key_is_rejected() {
        let c = cfg(json!({"x": {"bogus": 1}}));
        assert!(merge(&Opts::default(), "x", Some(&c)).is_err());
    }
}
