//! Layered run configuration: built-in defaults, then the top-level keys of
//! the TOML config file, then the subcommand's table in that file, then
//! command-line flags.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Parsed config file; empty when no file was given.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    table: Map<String, Value>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text)?;
        match serde_json::to_value(table)? {
            Value::Object(table) => Ok(Self { table }),
            _ => unreachable!("a TOML document is a table"),
        }
    }

    /// Top-level scalar and array keys, shared by every subcommand.
    fn globals(&self) -> Map<String, Value> {
        self.table
            .iter()
            .filter(|(_, v)| !v.is_object())
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    fn section(&self, name: &str) -> Result<Map<String, Value>> {
        match self.table.get(name) {
            None => Ok(Map::new()),
            Some(Value::Object(m)) => Ok(m.clone()),
            Some(_) => Err(Error::InvalidConfig(format!(
                "config key '{name}' must be a table"
            ))),
        }
    }
}

fn overlay(base: &mut Map<String, Value>, top: Map<String, Value>) {
    for (k, v) in top {
        if !v.is_null() {
            base.insert(k, v);
        }
    }
}

/// Resolves the settings of subcommand `section`. Unknown keys in the
/// subcommand's table are an error; unknown top-level keys are ignored
/// because they may belong to another subcommand.
pub fn resolve<T, F>(file: &ConfigFile, section: &str, flags: &F) -> Result<T>
where
    T: Serialize + DeserializeOwned + Default,
    F: Serialize,
{
    let Value::Object(mut merged) = serde_json::to_value(T::default())? else {
        unreachable!("settings serialize to an object");
    };
    let known: Vec<String> = merged.keys().cloned().collect();
    let globals = file
        .globals()
        .into_iter()
        .filter(|(k, _)| known.contains(k))
        .collect();
    overlay(&mut merged, globals);
    let sec = file.section(section)?;
    if let Some(k) = sec.keys().find(|k| !known.contains(k)) {
        return Err(Error::InvalidConfig(format!(
            "unknown key '{k}' in [{section}]"
        )));
    }
    overlay(&mut merged, sec);
    let Value::Object(flags) = serde_json::to_value(flags)? else {
        unreachable!("flags serialize to an object");
    };
    overlay(&mut merged, flags);
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| Error::InvalidConfig(format!("[{section}]: {e}")))
}
