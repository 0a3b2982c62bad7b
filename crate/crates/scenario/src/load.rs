//! Reading scenario text, applying `--set` overrides and resolving built-ins.

use std::path::Path;

use toml::Value;

use crate::schema::Scenario;
use crate::ScenarioError;

pub const BUILTINS: [(&str, &str); 5] = [
    ("compressor_fleet", include_str!("../scenarios/compressor_fleet.scn")),
    ("paint_station", include_str!("../scenarios/paint_station.scn")),
    ("plant_scale", include_str!("../scenarios/plant_scale.scn")),
    ("lpwan_fleet", include_str!("../scenarios/lpwan_fleet.scn")),
    ("e2e_full", include_str!("../scenarios/e2e_full.scn")),
];

pub fn list_scenarios() -> Vec<&'static str> {
    BUILTINS.iter().map(|(n, _)| *n).collect()
}

pub fn builtin_text(name: &str) -> Option<&'static str> {
    let stem = name.strip_suffix(".scn").unwrap_or(name);
    BUILTINS.iter().find(|(n, _)| *n == stem).map(|(_, t)| *t)
}

/// A file on disk wins; otherwise a built-in with the same stem.
pub fn read_source(file: &str) -> Result<String, ScenarioError> {
    let path = Path::new(file);
    if path.exists() {
        return std::fs::read_to_string(path).map_err(|e| ScenarioError::Io(format!("{file}: {e}")));
    }
    let stem = path.file_name().and_then(|s| s.to_str()).unwrap_or(file);
    builtin_text(stem)
        .map(str::to_string)
        .ok_or_else(|| ScenarioError::Io(format!("{file}: no such file or built-in scenario")))
}

/// `placement` is shorthand for `placements.analytics`.
fn expand_alias(path: &str) -> &str {
    match path {
        "placement" => "placements.analytics",
        other => other,
    }
}

/// Values that parse as TOML scalars keep their type; anything else is a
/// string.
fn parse_scalar(raw: &str) -> Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Sets `value` at a dotted path; numeric segments index arrays.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), ScenarioError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ScenarioError::Override(format!("{assignment}: expected key=value")))?;
    let path = expand_alias(path.trim());
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(ScenarioError::Override(format!("{path}: empty path segment")));
    }
    let mut cur = root;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        cur = match cur {
            Value::Table(t) => {
                if last {
                    t.insert(seg.to_string(), parse_scalar(raw.trim()));
                    return Ok(());
                }
                t.entry(seg.to_string()).or_insert_with(|| Value::Table(toml::Table::new()))
            }
            Value::Array(a) => {
                let idx: usize = seg
                    .parse()
                    .map_err(|_| ScenarioError::Override(format!("{path}: {seg} is not an index")))?;
                let len = a.len();
                let slot = a
                    .get_mut(idx)
                    .ok_or_else(|| ScenarioError::Override(format!("{path}: index {idx} out of range ({len})")))?;
                if last {
                    *slot = parse_scalar(raw.trim());
                    return Ok(());
                }
                slot
            }
            _ => return Err(ScenarioError::Override(format!("{path}: {seg} is not a table"))),
        };
    }
    Ok(())
}

/// Parses scenario text and applies overrides in order.
pub fn parse_scenario(text: &str, overrides: &[String]) -> Result<Scenario, ScenarioError> {
    let mut root: Value = toml::from_str::<toml::Table>(text)
        .map(Value::Table)
        .map_err(|e| ScenarioError::Parse(e.to_string()))?;
    for o in overrides {
        apply_override(&mut root, o)?;
    }
    root.try_into().map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))
}

pub fn load_scenario(file: &str, overrides: &[String]) -> Result<Scenario, ScenarioError> {
    parse_scenario(&read_source(file)?, overrides)
}
