//! Result files: a versioned JSON envelope with provenance and the
//! resolved configuration.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::provenance::Provenance;

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, T: Serialize> {
    schema: String,
    provenance: &'a Provenance,
    config: &'a C,
    result: &'a T,
}

pub fn schema(command: &str) -> String {
    format!("{}/{command}/v1", crate::provenance::TOOL)
}

/// Writes the envelope to `out`, or to stdout when `out` is `None`.
pub fn write_json<C: Serialize, T: Serialize>(
    out: Option<&Path>,
    command: &str,
    provenance: &Provenance,
    config: &C,
    result: &T,
) -> Result<()> {
    let env = Envelope {
        schema: schema(command),
        provenance,
        config,
        result,
    };
    let mut text = serde_json::to_string_pretty(&env)?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// `# key=value` provenance lines for CSV outputs.
pub fn csv_comments(provenance: &Provenance) -> Vec<(&'static str, String)> {
    vec![
        ("tool", provenance.tool.clone()),
        ("version", provenance.version.clone()),
        ("config_hash", provenance.config_hash.clone()),
        ("seed", provenance.seed.to_string()),
        ("timestamp", provenance.timestamp.clone()),
    ]
}
