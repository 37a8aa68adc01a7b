use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SAMPLE_TYPE_VOCAB: &str = "SAMPLE_TYPE";
pub const TECHNIQUE_VOCAB: &str = "EXPERIMENTAL_TECHNIQUE";
pub const DATASET_TYPE_VOCAB: &str = "DATASET_TYPE";

const SEED_VOCABULARIES: [&str; 3] = [
    include_str!("../../seed/sample_type.json"),
    include_str!("../../seed/experimental_technique.json"),
    include_str!("../../seed/dataset_type.json"),
];
const SEED_SCHEMAS: &str = include_str!("../../seed/schemas.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Text,
    Real,
    Integer,
    Boolean,
    /// ISO `YYYY-MM-DD`.
    Date,
    Vocabulary(String),
    /// CSV text as entered in the notebook's spreadsheet widget.
    Spreadsheet,
    RealTriple,
    TextSet,
    /// Element symbol -> atomic percent.
    Composition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyDefinition {
    pub name: String,
    pub value_kind: ValueKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectTypeSchema {
    pub type_name: String,
    pub properties: Vec<PropertyDefinition>,
    pub required_property_names: BTreeSet<String>,
}

impl ObjectTypeSchema {
    pub fn property(&self, name: &str) -> Option<&PropertyDefinition> {
        self.properties.iter().find(|p| p.name == name)
    }

    fn check(&self, vocabularies: &BTreeMap<String, ControlledVocabulary>) -> Result<()> {
        let mut seen = BTreeSet::new();
        for prop in &self.properties {
            if !seen.insert(prop.name.as_str()) {
                return Err(Error::Domain(format!(
                    "schema {}: duplicate property `{}`",
                    self.type_name, prop.name
                )));
            }
            if let ValueKind::Vocabulary(v) = &prop.value_kind {
                if !vocabularies.contains_key(v) {
                    return Err(Error::NotFound(format!(
                        "schema {}: vocabulary {v} for `{}`",
                        self.type_name, prop.name
                    )));
                }
            }
        }
        if let Some(missing) = self
            .required_property_names
            .iter()
            .find(|r| !seen.contains(r.as_str()))
        {
            return Err(Error::Domain(format!(
                "schema {}: required property `{missing}` is not defined",
                self.type_name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabularyTerm {
    pub code: String,
    pub label: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlledVocabulary {
    pub name: String,
    pub terms: Vec<VocabularyTerm>,
}

impl ControlledVocabulary {
    pub fn new(name: impl Into<String>, terms: Vec<VocabularyTerm>) -> Result<Self> {
        let vocab = ControlledVocabulary {
            name: name.into(),
            terms,
        };
        vocab.check()?;
        Ok(vocab)
    }

    fn check(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::Domain(format!("vocabulary {} has no terms", self.name)));
        }
        let mut codes = BTreeSet::new();
        for t in &self.terms {
            if !codes.insert(t.code.as_str()) {
                return Err(Error::Domain(format!(
                    "vocabulary {}: duplicate term code {}",
                    self.name, t.code
                )));
            }
        }
        Ok(())
    }

    pub fn term(&self, code: &str) -> Option<&VocabularyTerm> {
        self.terms.iter().find(|t| t.code == code)
    }

    pub fn contains(&self, code: &str) -> bool {
        self.term(code).is_some()
    }
}

/// Object type schemas plus the controlled vocabularies they reference.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    schemas: BTreeMap<String, ObjectTypeSchema>,
    vocabularies: BTreeMap<String, ControlledVocabulary>,
}

impl Catalog {
    /// The shipped schemas and vocabularies.
    pub fn seeded() -> Catalog {
        let mut catalog = Catalog::default();
        for text in SEED_VOCABULARIES {
            let vocab: ControlledVocabulary =
                serde_json::from_str(text).expect("seed vocabulary is valid JSON");
            catalog.add_vocabulary(vocab).expect("seed vocabulary is consistent");
        }
        let schemas: Vec<ObjectTypeSchema> =
            serde_json::from_str(SEED_SCHEMAS).expect("seed schemas are valid JSON");
        for schema in schemas {
            catalog.add_schema(schema).expect("seed schema is consistent");
        }
        catalog
    }

    pub fn add_vocabulary(&mut self, vocab: ControlledVocabulary) -> Result<()> {
        vocab.check()?;
        self.vocabularies.insert(vocab.name.clone(), vocab);
        Ok(())
    }

    pub fn add_schema(&mut self, schema: ObjectTypeSchema) -> Result<()> {
        schema.check(&self.vocabularies)?;
        self.schemas.insert(schema.type_name.clone(), schema);
        Ok(())
    }

    /// Appends a term to an existing vocabulary.
    pub fn extend_vocabulary(&mut self, name: &str, term: VocabularyTerm) -> Result<()> {
        let vocab = self
            .vocabularies
            .get_mut(name)
            .ok_or_else(|| Error::NotFound(format!("vocabulary {name}")))?;
        if vocab.contains(&term.code) {
            return Err(Error::Domain(format!(
                "vocabulary {name} already has term {}",
                term.code
            )));
        }
        vocab.terms.push(term);
        Ok(())
    }

    pub fn schema(&self, type_name: &str) -> Result<&ObjectTypeSchema> {
        self.schemas
            .get(type_name)
            .ok_or_else(|| Error::SchemaNotFound(type_name.to_string()))
    }

    pub fn vocabulary(&self, name: &str) -> Result<&ControlledVocabulary> {
        self.vocabularies
            .get(name)
            .ok_or_else(|| Error::NotFound(format!("vocabulary {name}")))
    }

    pub fn vocabularies(&self) -> &BTreeMap<String, ControlledVocabulary> {
        &self.vocabularies
    }

    pub fn schemas(&self) -> impl Iterator<Item = &ObjectTypeSchema> {
        self.schemas.values()
    }

    /// Checks that `code` is a term of `vocabulary`.
    pub fn require_term(&self, vocabulary: &str, code: &str) -> Result<&VocabularyTerm> {
        self.vocabulary(vocabulary)?
            .term(code)
            .ok_or_else(|| Error::Vocab {
                vocabulary: vocabulary.to_string(),
                term: code.to_string(),
            })
    }
}
