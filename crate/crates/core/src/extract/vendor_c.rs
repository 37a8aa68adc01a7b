use super::{RawEntry, RawKeyValues, RawValue};
use crate::error::{Error, Result};

/// Keys in this section are emitted without a section prefix.
pub(crate) const SYSTEM_SECTION: &str = "System";

/// INI-style text: `[Section]` headers and `Key=Value` lines in SI base units.
/// Keys are emitted as `Section.Key`.
pub fn parse_vendor_c(bytes: &[u8]) -> Result<(RawKeyValues, Vec<String>)> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::Encoding(format!("vendor C text: {e}")))?;
    let mut raw = RawKeyValues::default();
    let mut warnings = Vec::new();
    let mut section: Option<&str> = None;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with(';') || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .map(str::trim)
                .filter(|n| !n.is_empty())
                .ok_or_else(|| Error::syntax(lineno, format!("malformed section header `{line}`")))?;
            section = Some(name);
            continue;
        }
        let Some(current) = section else {
            return Err(Error::syntax(lineno, "key outside of any section"));
        };
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::syntax(lineno, format!("expected `Key=Value`, found `{line}`")));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::syntax(lineno, "empty key"));
        }
        let full_key = if current == SYSTEM_SECTION {
            key.to_string()
        } else {
            format!("{current}.{key}")
        };
        let value = value.trim();
        let value = match value.parse::<f64>() {
            Ok(x) => RawValue::Number(x),
            Err(_) => RawValue::Text(value.to_string()),
        };
        let entry = RawEntry {
            key: full_key.clone(),
            value,
            unit: None,
        };
        if !raw.upsert(entry) {
            warnings.push(format!(
                "duplicate key `{full_key}` on line {lineno}; last value kept"
            ));
        }
    }
    Ok((raw, warnings))
}
