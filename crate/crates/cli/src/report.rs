//! Deterministic JSON emission.

use std::path::Path;

use serde::Serialize;
use serde_json::{Number, Value};

use crate::error::CliError;

pub const SIGNIFICANT_DIGITS: usize = 9;

/// Rounds a float to nine significant digits.
pub fn round_sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v)
        .parse()
        .expect("formatted float parses")
}

/// Rounds every float in the tree; integers are left alone.
pub fn canonicalize(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            let r = round_sig(n.as_f64().expect("f64 number"));
            *value = Number::from_f64(r).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(canonicalize),
        Value::Object(map) => map.values_mut().for_each(canonicalize),
        _ => {}
    }
}

pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut v = serde_json::to_value(value).map_err(|e| CliError::internal(format!("serialize: {e}")))?;
    canonicalize(&mut v);
    let mut text =
        serde_json::to_string_pretty(&v).map_err(|e| CliError::internal(format!("serialize: {e}")))?;
    text.push('\n');
    Ok(text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))
}
