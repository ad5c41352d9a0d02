//! JSON configuration files with dotted-path command-line overrides.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::Failure;

/// Reads `path` (or the defaults when absent), applies every `key=value`
/// override and deserializes the result. Override values are parsed as JSON
/// and fall back to plain strings.
pub fn load<T>(path: Option<&Path>, overrides: &[String]) -> Result<T, Failure>
where
    T: DeserializeOwned + Serialize + Default,
{
    let mut doc = match path {
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            serde_json::from_slice(&bytes).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?
        }
        None => serde_json::to_value(T::default()).expect("defaults serialize"),
    };
    for o in overrides {
        apply(&mut doc, o)?;
    }
    serde_json::from_value(doc).map_err(|e| Failure::Usage(format!("configuration: {e}")))
}

/// Sets `a.b.c=value` in `doc`, creating intermediate objects as needed.
pub fn apply(doc: &mut Value, assignment: &str) -> Result<(), Failure> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Failure::Usage(format!("override `{assignment}` is not of the form key=value")))?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Failure::Usage(format!("override `{assignment}` has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    for part in key.split('.') {
        if !node.is_object() {
            *node = Value::Object(Default::default());
        }
        node = node.as_object_mut().expect("object").entry(part).or_insert(Value::Null);
    }
    *node = value;
    Ok(())
}

pub fn to_pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("plain data serializes");
    bytes.push(b'\n');
    bytes
}
