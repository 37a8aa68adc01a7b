use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const TIMESTAMP_DIGITS: usize = 17;
pub const QR_PREFIX: &str = "rdm://object/";

/// Immutable object identifier: `YYYYMMDDhhmmssSSS-<seq>`.
///
/// The 17-digit UTC millisecond timestamp makes ids sortable by mint time;
/// the sequence number disambiguates ids minted within the same millisecond.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PermId {
    text: String,
    seq: u64,
}

/// Formats a permId from a clock reading and a sequence number.
///
/// The caller guarantees `seq >= 1`; a zero sequence is clamped to 1 so the
/// result always satisfies the grammar.
pub fn mint_perm_id(clock: DateTime<Utc>, seq: u64) -> PermId {
    let seq = seq.max(1);
    let text = format!("{}-{}", clock.format("%Y%m%d%H%M%S%3f"), seq);
    PermId { text, seq }
}

impl PermId {
    pub fn parse(s: &str) -> Result<PermId> {
        let bad = || Error::Parse(format!("`{s}` is not a permId (YYYYMMDDhhmmssSSS-<seq>)"));
        let (stamp, seq_text) = s.split_once('-').ok_or_else(bad)?;
        if stamp.len() != TIMESTAMP_DIGITS || !stamp.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        if seq_text.is_empty()
            || !seq_text.bytes().all(|b| b.is_ascii_digit())
            || seq_text.starts_with('0')
        {
            return Err(bad());
        }
        let seq: u64 = seq_text.parse().map_err(|_| bad())?;
        Ok(PermId {
            text: s.to_string(),
            seq,
        })
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn timestamp_digits(&self) -> &str {
        &self.text[..TIMESTAMP_DIGITS]
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }
}

impl Ord for PermId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.timestamp_digits()
            .cmp(other.timestamp_digits())
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for PermId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl fmt::Debug for PermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PermId({})", self.text)
    }
}

impl FromStr for PermId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PermId::parse(s)
    }
}

impl Serialize for PermId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for PermId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        PermId::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Payload encoded into the QR label attached to a physical specimen.
pub fn qr_payload(id: &PermId) -> String {
    format!("{QR_PREFIX}{id}")
}

pub fn resolve_qr_payload(payload: &str) -> Result<PermId> {
    let rest = payload
        .strip_prefix(QR_PREFIX)
        .ok_or_else(|| Error::Parse(format!("`{payload}` is not an rdm object payload")))?;
    PermId::parse(rest)
}
