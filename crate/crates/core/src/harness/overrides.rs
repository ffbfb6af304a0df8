//! Dotted-path `key=value` overrides applied to a parsed TOML document.

use crate::error::{Error, Result};

/// Parsed configuration document.
pub type Document = toml::Value;

/// One parsed override.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: Vec<String>,
    pub value: toml::Value,
}

/// Parse `a.b.c=value`. The value is read as a TOML literal, falling back to a bare string.
pub fn parse_override(text: &str) -> Result<Override> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{text}' is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::Config(format!("override '{text}' has an empty key")));
    }
    let path: Vec<String> = key.split('.').map(|s| s.trim().to_string()).collect();
    if path.iter().any(|p| p.is_empty() || !p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')) {
        return Err(Error::Config(format!("invalid override key '{key}'")));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    Ok(Override { path, value })
}

/// Set `ov.path` inside `doc`, creating intermediate tables. Unknown final keys are caught when
/// the document is deserialized.
pub fn apply_override(doc: &mut toml::Value, ov: &Override) -> Result<()> {
    let mut cur = doc;
    for (i, part) in ov.path.iter().enumerate() {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("'{}' is not a table", ov.path[..i].join("."))))?;
        if i + 1 == ov.path.len() {
            table.insert(part.clone(), ov.value.clone());
            return Ok(());
        }
        cur = table.entry(part.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    unreachable!("override paths are non-empty")
}

pub fn apply_overrides(doc: &mut toml::Value, overrides: &[Override]) -> Result<()> {
    overrides.iter().try_for_each(|o| apply_override(doc, o))
}

/// Parse a TOML document and apply overrides in order.
pub fn document_with_overrides(text: &str, overrides: &[Override]) -> Result<toml::Value> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut doc = toml::Value::Table(table);
    apply_overrides(&mut doc, overrides)?;
    Ok(doc)
}
