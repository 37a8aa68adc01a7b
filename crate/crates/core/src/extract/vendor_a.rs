use super::{RawEntry, RawKeyValues, RawValue};
use crate::error::{Error, Result};

pub const VENDOR_A_MAGIC: [u8; 8] = *b"VNDA\x00\x01\x00\x00";

/// Raw keys appended from the embedded PNG header.
pub(crate) const IHDR_WIDTH_KEY: &str = "PNG.IHDR.Width";
pub(crate) const IHDR_HEIGHT_KEY: &str = "PNG.IHDR.Height";

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

/// Layout: magic, u32 LE text length, UTF-8 `Key = Value Unit` lines, PNG.
pub fn parse_vendor_a(bytes: &[u8]) -> Result<(RawKeyValues, Vec<String>)> {
    let mut warnings = Vec::new();
    let header_end = VENDOR_A_MAGIC.len() + 4;
    if bytes.len() < header_end {
        return Err(Error::Truncated(format!(
            "vendor A header needs {header_end} bytes, file has {}",
            bytes.len()
        )));
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let text_end = header_end
        .checked_add(len)
        .filter(|end| *end <= bytes.len())
        .ok_or_else(|| {
            Error::Truncated(format!(
                "metadata block of {len} bytes exceeds file ({} bytes after header)",
                bytes.len() - header_end
            ))
        })?;
    let text = std::str::from_utf8(&bytes[header_end..text_end])
        .map_err(|e| Error::Encoding(format!("vendor A metadata: {e}")))?;

    let mut raw = RawKeyValues::default();
    if len == 0 {
        warnings.push("vendor A metadata block is empty".to_string());
    }
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            warnings.push(format!("metadata line {} has no `=`; skipped", idx + 1));
            continue;
        };
        let key = key.trim().to_string();
        let (value, unit) = split_value(value.trim());
        if !raw.upsert(RawEntry { key: key.clone(), value, unit }) {
            warnings.push(format!("duplicate key `{key}`; last value kept"));
        }
    }

    let payload = &bytes[text_end..];
    match png_dimensions(payload) {
        Some((w, h)) => {
            for (key, v) in [(IHDR_WIDTH_KEY, w), (IHDR_HEIGHT_KEY, h)] {
                raw.upsert(RawEntry {
                    key: key.into(),
                    value: RawValue::Integer(v as u64),
                    unit: None,
                });
            }
        }
        None if payload.is_empty() => warnings.push("no image payload".to_string()),
        None => warnings.push("image payload is not a PNG".to_string()),
    }
    Ok((raw, warnings))
}

/// The embedded image bytes following the metadata block, if any.
pub fn vendor_a_image_payload(bytes: &[u8]) -> Option<&[u8]> {
    if bytes.len() < 12 || bytes[..8] != VENDOR_A_MAGIC {
        return None;
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let start = 12usize.checked_add(len)?;
    bytes.get(start..).filter(|p| !p.is_empty())
}

/// "20.00 kV" -> (20.0, "kV"); anything that is not `number [unit]` stays
/// text.
fn split_value(value: &str) -> (RawValue, Option<String>) {
    let mut parts = value.split_whitespace();
    let number = parts.next().and_then(|t| t.parse::<f64>().ok());
    let rest: Vec<&str> = parts.collect();
    match (number, rest.as_slice()) {
        (Some(x), []) => (RawValue::Number(x), None),
        (Some(x), [unit]) => (RawValue::Number(x), Some(unit.to_string())),
        _ => (RawValue::Text(value.to_string()), None),
    }
}

fn png_dimensions(payload: &[u8]) -> Option<(u32, u32)> {
    // signature, chunk length, "IHDR", width, height
    if payload.len() < 24 || payload[..8] != PNG_SIGNATURE || &payload[12..16] != b"IHDR" {
        return None;
    }
    let w = u32::from_be_bytes(payload[16..20].try_into().unwrap());
    let h = u32::from_be_bytes(payload[20..24].try_into().unwrap());
    Some((w, h))
}
