//! Instrument metadata extraction: vendor format detection, parsing into raw
//! key/value lists, and mapping onto the unified SEM vocabulary.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Strategy};

pub mod fixtures;
mod unified;
mod units;
mod vendor_a;
mod vendor_b;
mod vendor_c;

pub use unified::{
    compute_databar_rows, compute_magnification, map_to_unified, Cell, Field, TableRow,
    UnifiedSemMetadata, SEM_FIELD_TABLE,
};
pub use units::{normalize, unit_factor, Quantity};
pub use vendor_a::{parse_vendor_a, vendor_a_image_payload, VENDOR_A_MAGIC};
pub use vendor_b::{parse_vendor_b, TYPE_F64, TYPE_U32, VENDOR_B_MAGIC};
pub use vendor_c::parse_vendor_c;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VendorFormat {
    VendorA,
    VendorB,
    VendorC,
    Unknown,
}

impl VendorFormat {
    pub const PARSEABLE: [VendorFormat; 3] =
        [VendorFormat::VendorA, VendorFormat::VendorB, VendorFormat::VendorC];

    pub fn as_str(self) -> &'static str {
        match self {
            VendorFormat::VendorA => "vendorA",
            VendorFormat::VendorB => "vendorB",
            VendorFormat::VendorC => "vendorC",
            VendorFormat::Unknown => "unknown",
        }
    }

    /// Column index in the vendor mapping table.
    pub(crate) fn column(self) -> Option<usize> {
        match self {
            VendorFormat::VendorA => Some(0),
            VendorFormat::VendorB => Some(1),
            VendorFormat::VendorC => Some(2),
            VendorFormat::Unknown => None,
        }
    }
}

impl fmt::Display for VendorFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VendorFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vendora" | "a" => Ok(VendorFormat::VendorA),
            "vendorb" | "b" => Ok(VendorFormat::VendorB),
            "vendorc" | "c" => Ok(VendorFormat::VendorC),
            "unknown" | "none" => Ok(VendorFormat::Unknown),
            _ => Err(Error::Parse(format!("unknown vendor format `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawValue {
    Integer(u64),
    Number(f64),
    Text(String),
}

impl RawValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            RawValue::Integer(n) => Some(*n as f64),
            RawValue::Number(x) => Some(*x),
            RawValue::Text(_) => None,
        }
    }

    /// The value as a non-negative whole count.
    pub fn as_count(&self) -> Option<u64> {
        match self {
            RawValue::Integer(n) => Some(*n),
            RawValue::Number(x) if *x >= 0.0 && x.fract() == 0.0 && *x <= u32::MAX as f64 => {
                Some(*x as u64)
            }
            _ => None,
        }
    }
}

impl fmt::Display for RawValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RawValue::Integer(n) => write!(f, "{n}"),
            RawValue::Number(x) => write!(f, "{x}"),
            RawValue::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEntry {
    pub key: String,
    pub value: RawValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

/// Key/value pairs exactly as found in a file, in file order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawKeyValues {
    pub entries: Vec<RawEntry>,
}

impl RawKeyValues {
    pub fn get(&self, key: &str) -> Option<&RawEntry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts or, for a repeated key, overwrites in place and reports
    /// `false`.
    pub(crate) fn upsert(&mut self, entry: RawEntry) -> bool {
        match self.entries.iter_mut().find(|e| e.key == entry.key) {
            Some(existing) => {
                *existing = entry;
                false
            }
            None => {
                self.entries.push(entry);
                true
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseResult {
    pub vendor: VendorFormat,
    pub raw: RawKeyValues,
    pub unified: UnifiedSemMetadata,
    pub warnings: Vec<String>,
}

const MAGIC_LEN: usize = 8;

pub fn detect_format(leading: &[u8]) -> VendorFormat {
    if leading.len() < MAGIC_LEN {
        return VendorFormat::Unknown;
    }
    if leading[..MAGIC_LEN] == VENDOR_A_MAGIC {
        return VendorFormat::VendorA;
    }
    if leading[..MAGIC_LEN] == VENDOR_B_MAGIC {
        return VendorFormat::VendorB;
    }
    let start = leading
        .iter()
        .position(|b| !b.is_ascii_whitespace())
        .unwrap_or(leading.len());
    if leading[start..].starts_with(b"[System]") {
        return VendorFormat::VendorC;
    }
    VendorFormat::Unknown
}

/// Runs the raw parser for `vendor` without checking the magic first.
pub fn parse_raw(bytes: &[u8], vendor: VendorFormat) -> Result<(RawKeyValues, Vec<String>)> {
    match vendor {
        VendorFormat::VendorA => parse_vendor_a(bytes),
        VendorFormat::VendorB => parse_vendor_b(bytes),
        VendorFormat::VendorC => parse_vendor_c(bytes),
        VendorFormat::Unknown => Err(Error::Parse("no parser for unknown format".into())),
    }
}

/// Parses a whole file with the parser for `vendor`.
///
/// Fails with PARSE when the file does not carry that vendor's magic.
pub fn parse_file(bytes: &[u8], vendor: VendorFormat) -> Result<ParseResult> {
    let detected = detect_format(bytes);
    if vendor == VendorFormat::Unknown {
        return Err(Error::Parse("no parser for unknown format".into()));
    }
    if detected != vendor {
        return Err(Error::Parse(format!(
            "file is not {vendor} (detected {detected})"
        )));
    }
    let (raw, mut warnings) = parse_raw(bytes, vendor)?;
    let (unified, map_warnings) = map_to_unified(&raw, vendor)?;
    warnings.extend(map_warnings);
    Ok(ParseResult {
        vendor,
        raw,
        unified,
        warnings,
    })
}

/// Detects and parses.
pub fn parse_auto(bytes: &[u8]) -> Result<ParseResult> {
    match detect_format(bytes) {
        VendorFormat::Unknown => Err(Error::Parse("unrecognized file format".into())),
        v => parse_file(bytes, v),
    }
}

/// Parses many files independently.
pub fn parse_many<B: AsRef<[u8]> + Sync>(files: &[B], strategy: Strategy) -> Vec<Result<ParseResult>> {
    par::map(strategy, files, |bytes| parse_auto(bytes.as_ref()))
}
