use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::elements::is_element_symbol;
use super::schema::{ControlledVocabulary, ObjectTypeSchema, ValueKind};
use super::ObjectRecord;
use crate::error::{Error, Result};

/// Allowed absolute deviation of a composition sum from 100 at.%.
pub const COMPOSITION_TOLERANCE: f64 = 1e-6;
// Summing decimal percentages in binary floating point perturbs the sum by a
// few ulps of 100; without this slack 60.000001 + 40 would fall outside.
const SUM_ROUNDING_SLACK: f64 = 64.0 * f64::EPSILON * 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleId {
    #[serde(rename = "REQUIRED")]
    Required,
    #[serde(rename = "UNKNOWN_PROPERTY")]
    UnknownProperty,
    #[serde(rename = "KIND")]
    Kind,
    #[serde(rename = "VOCAB_TERM")]
    VocabTerm,
    #[serde(rename = "SUM_100")]
    Sum100,
    #[serde(rename = "ELEMENT")]
    Element,
    #[serde(rename = "NEGATIVE")]
    Negative,
    #[serde(rename = "TYPE_IMMUTABLE")]
    TypeImmutable,
}

impl RuleId {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::Required => "REQUIRED",
            RuleId::UnknownProperty => "UNKNOWN_PROPERTY",
            RuleId::Kind => "KIND",
            RuleId::VocabTerm => "VOCAB_TERM",
            RuleId::Sum100 => "SUM_100",
            RuleId::Element => "ELEMENT",
            RuleId::Negative => "NEGATIVE",
            RuleId::TypeImmutable => "TYPE_IMMUTABLE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub property_name: String,
    pub rule_id: RuleId,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        ValidationReport {
            ok: violations.is_empty(),
            violations,
        }
    }

    pub fn has(&self, property: &str, rule: RuleId) -> bool {
        self.violations
            .iter()
            .any(|v| v.property_name == property && v.rule_id == rule)
    }

    pub fn into_result(self) -> Result<()> {
        if self.ok {
            Ok(())
        } else {
            Err(Error::Validation(Box::new(self)))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{} [{}]: {}", v.property_name, v.rule_id.as_str(), v.message)?;
        }
        Ok(())
    }
}

/// `true` when the composition percentages sum to 100 within tolerance.
pub fn composition_sums_to_100(composition: &BTreeMap<String, f64>) -> bool {
    let sum: f64 = composition.values().sum();
    (sum - 100.0).abs() <= COMPOSITION_TOLERANCE + SUM_ROUNDING_SLACK
}

/// Checks a record against its type schema. Never mutates.
pub fn validate_object(
    record: &ObjectRecord,
    schema: &ObjectTypeSchema,
    vocabularies: &BTreeMap<String, ControlledVocabulary>,
) -> Result<ValidationReport> {
    if record.type_name != schema.type_name {
        return Err(Error::SchemaNotFound(record.type_name.clone()));
    }
    let mut violations = Vec::new();
    let mut push = |name: &str, rule: RuleId, message: String| {
        violations.push(Violation {
            property_name: name.to_string(),
            rule_id: rule,
            message,
        })
    };

    for required in &schema.required_property_names {
        let present = record
            .properties
            .get(required)
            .is_some_and(|v| !v.is_null() && v.as_str() != Some(""));
        if !present {
            push(required, RuleId::Required, format!("`{required}` is required"));
        }
    }

    for (name, value) in &record.properties {
        let Some(def) = schema.property(name) else {
            push(
                name,
                RuleId::UnknownProperty,
                format!("`{name}` is not a property of {}", schema.type_name),
            );
            continue;
        };
        if value.is_null() {
            continue;
        }
        check_value(name, &def.value_kind, value, vocabularies, &mut push);
    }

    Ok(ValidationReport::from_violations(violations))
}

fn check_value(
    name: &str,
    kind: &ValueKind,
    value: &Value,
    vocabularies: &BTreeMap<String, ControlledVocabulary>,
    push: &mut impl FnMut(&str, RuleId, String),
) {
    let kind_err = |push: &mut dyn FnMut(&str, RuleId, String), expected: &str| {
        push(name, RuleId::Kind, format!("`{name}` must be {expected}"))
    };
    match kind {
        ValueKind::Text | ValueKind::Spreadsheet => {
            if !value.is_string() {
                kind_err(push, "text");
            }
        }
        ValueKind::Real => {
            if !value.is_number() {
                kind_err(push, "a real number");
            }
        }
        ValueKind::Integer => {
            if value.as_i64().is_none() {
                kind_err(push, "an integer");
            }
        }
        ValueKind::Boolean => {
            if !value.is_boolean() {
                kind_err(push, "a boolean");
            }
        }
        ValueKind::Date => {
            let ok = value
                .as_str()
                .is_some_and(|s| NaiveDate::parse_from_str(s, "%Y-%m-%d").is_ok());
            if !ok {
                kind_err(push, "a date (YYYY-MM-DD)");
            }
        }
        ValueKind::Vocabulary(vocab_name) => match value.as_str() {
            None => kind_err(push, "a vocabulary term code"),
            Some(code) => {
                let known = vocabularies
                    .get(vocab_name)
                    .is_some_and(|v| v.contains(code));
                if !known {
                    push(
                        name,
                        RuleId::VocabTerm,
                        format!("`{code}` is not a term of {vocab_name}"),
                    );
                }
            }
        },
        ValueKind::RealTriple => {
            let triple: Option<Vec<f64>> = value
                .as_array()
                .filter(|a| a.len() == 3)
                .and_then(|a| a.iter().map(Value::as_f64).collect());
            match triple {
                None => kind_err(push, "a triple of reals"),
                Some(t) if t.iter().any(|x| *x < 0.0) => push(
                    name,
                    RuleId::Negative,
                    format!("`{name}` entries must be >= 0"),
                ),
                Some(_) => {}
            }
        }
        ValueKind::TextSet => {
            let items: Option<Vec<&str>> = value
                .as_array()
                .and_then(|a| a.iter().map(Value::as_str).collect());
            match items {
                None => kind_err(push, "a list of text"),
                Some(items) => {
                    let unique: BTreeSet<_> = items.iter().collect();
                    if unique.len() != items.len() {
                        kind_err(push, "a set of text without duplicates");
                    }
                }
            }
        }
        ValueKind::Composition => {
            let Some(map) = value.as_object() else {
                kind_err(push, "a map of element symbol to atomic percent");
                return;
            };
            let mut parsed = BTreeMap::new();
            let mut well_formed = true;
            for (symbol, pct) in map {
                if !is_element_symbol(symbol) {
                    push(
                        name,
                        RuleId::Element,
                        format!("`{symbol}` is not an element symbol"),
                    );
                    well_formed = false;
                }
                match pct.as_f64() {
                    Some(x) if x < 0.0 => {
                        push(name, RuleId::Negative, format!("{symbol} fraction is negative"));
                        well_formed = false;
                    }
                    Some(x) => {
                        parsed.insert(symbol.clone(), x);
                    }
                    None => {
                        kind_err(push, "a map of element symbol to atomic percent");
                        well_formed = false;
                    }
                }
            }
            if well_formed && !composition_sums_to_100(&parsed) {
                let sum: f64 = parsed.values().sum();
                push(
                    name,
                    RuleId::Sum100,
                    format!("composition sums to {sum}, expected 100"),
                );
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Catalog, PermId};
    use chrono::Utc;
    use serde_json::json;

    fn sample(props: Value) -> ObjectRecord {
        let properties = props.as_object().unwrap().clone().into_iter().collect();
        ObjectRecord::new(
            PermId::parse("20240101000000000-1").unwrap(),
            "Sample",
            "CRC",
            properties,
            Utc::now(),
        )
    }

    fn validate(record: &ObjectRecord) -> ValidationReport {
        let catalog = Catalog::seeded();
        validate_object(
            record,
            catalog.schema(&record.type_name).unwrap(),
            catalog.vocabularies(),
        )
        .unwrap()
    }

    fn base() -> Value {
        json!({
            "name": "FeAl cast",
            "sample_category": "BULK",
            "dimensions_mm": [10.0, 10.0, 2.0],
            "location": "Lab 1",
            "composition": {"Fe": 60.0, "Al": 40.0},
        })
    }

    #[test]
    fn complete_sample_is_ok() {
        let report = validate(&sample(base()));
        assert!(report.ok, "{report}");
        assert!(report.violations.is_empty());
    }

    #[test]
    fn sum_99_is_rejected() {
        let mut v = base();
        v["composition"] = json!({"Fe": 60.0, "Al": 39.0});
        let report = validate(&sample(v));
        assert!(!report.ok);
        assert!(report.has("composition", RuleId::Sum100));
    }

    #[test]
    fn missing_location_is_required_violation() {
        let mut v = base();
        v.as_object_mut().unwrap().remove("location");
        let report = validate(&sample(v));
        assert!(report.has("location", RuleId::Required));
        assert_eq!(report.violations.len(), 1);
    }

    #[test]
    fn collects_all_violations() {
        let v = json!({
            "sample_category": "BLOB",
            "dimensions_mm": [1.0, -1.0, 1.0],
            "composition": {"Fe": 50.0, "Qq": 50.0},
            "color": "red",
            "is_computational": "yes",
        });
        let report = validate(&sample(v));
        assert!(report.has("location", RuleId::Required));
        assert!(report.has("sample_category", RuleId::VocabTerm));
        assert!(report.has("dimensions_mm", RuleId::Negative));
        assert!(report.has("composition", RuleId::Element));
        assert!(report.has("color", RuleId::UnknownProperty));
        assert!(report.has("is_computational", RuleId::Kind));
        assert!(!report.ok);
    }

    #[test]
    fn computational_sample_without_category_is_fine() {
        let mut v = base();
        let obj = v.as_object_mut().unwrap();
        obj.remove("sample_category");
        obj.insert("is_computational".into(), json!(true));
        obj.insert("location".into(), json!("cluster:/scratch/feal"));
        assert!(validate(&sample(v)).ok);
    }

    #[test]
    fn wrong_schema_is_schema_not_found() {
        let catalog = Catalog::seeded();
        let rec = sample(base());
        let err = validate_object(&rec, catalog.schema("Device").unwrap(), catalog.vocabularies())
            .unwrap_err();
        assert_eq!(err.code().as_str(), "SCHEMA_NOT_FOUND");
    }

    #[test]
    fn composition_boundaries() {
        let comp = |fe: f64, al: f64| BTreeMap::from([("Fe".to_string(), fe), ("Al".to_string(), al)]);
        assert!(composition_sums_to_100(&comp(60.0, 40.0)));
        assert!(composition_sums_to_100(&comp(60.000001, 40.0)));
        assert!(composition_sums_to_100(&comp(59.999999, 40.0)));
        assert!(!composition_sums_to_100(&comp(60.0000011, 40.0)));
        assert!(!composition_sums_to_100(&comp(59.9999989, 40.0)));
        assert!(!composition_sums_to_100(&comp(60.0, 39.0)));
    }
}
