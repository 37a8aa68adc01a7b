use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::PermId;

pub type Properties = BTreeMap<String, Value>;

/// A typed entity in the repository: sample, instrument, protocol or
/// notebook entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub perm_id: PermId,
    pub type_name: String,
    /// Owning collection (personal, group or shared inventory space).
    pub space: String,
    #[serde(default)]
    pub properties: Properties,
    #[serde(default)]
    pub parents: BTreeSet<PermId>,
    #[serde(default)]
    pub children: BTreeSet<PermId>,
    pub registered_at: DateTime<Utc>,
}

impl ObjectRecord {
    pub fn new(
        perm_id: PermId,
        type_name: impl Into<String>,
        space: impl Into<String>,
        properties: Properties,
        registered_at: DateTime<Utc>,
    ) -> Self {
        ObjectRecord {
            perm_id,
            type_name: type_name.into(),
            space: space.into(),
            properties,
            parents: BTreeSet::new(),
            children: BTreeSet::new(),
            registered_at,
        }
    }

    pub fn text(&self, name: &str) -> Option<&str> {
        self.properties.get(name).and_then(Value::as_str)
    }

    pub fn real(&self, name: &str) -> Option<f64> {
        self.properties.get(name).and_then(Value::as_f64)
    }

    pub fn integer(&self, name: &str) -> Option<i64> {
        self.properties.get(name).and_then(Value::as_i64)
    }

    /// Composition map (element symbol -> atomic percent), if present and
    /// well-formed.
    pub fn composition(&self) -> Option<BTreeMap<String, f64>> {
        let map = self.properties.get("composition")?.as_object()?;
        map.iter()
            .map(|(k, v)| v.as_f64().map(|x| (k.clone(), x)))
            .collect()
    }

    /// A short human-readable label for graph views.
    pub fn label(&self) -> String {
        ["name", "title", "protocol_name", "model"]
            .iter()
            .find_map(|k| self.text(k))
            .map(str::to_string)
            .unwrap_or_else(|| format!("{} {}", self.type_name, self.perm_id))
    }
}

/// One append-only audit line recorded when a mutable property changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub timestamp: DateTime<Utc>,
    pub actor: String,
    pub perm_id: PermId,
    pub property: String,
    pub old: Option<Value>,
    pub new: Option<Value>,
}
