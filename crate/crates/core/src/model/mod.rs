//! Typed object repository: identities, schemas, vocabularies, validation
//! and the journaled store of records.

mod elements;
mod permid;
mod record;
mod repo;
mod schema;
mod validate;

pub use elements::{is_element_symbol, ELEMENT_SYMBOLS};
pub use permid::{mint_perm_id, qr_payload, resolve_qr_payload, PermId, QR_PREFIX};
pub use record::{AuditEntry, ObjectRecord, Properties};
pub use repo::{
    Clock, DatasetBuilder, JournalEvent, ManualClock, RepoState, Repository, SystemClock, JOURNAL_FORMAT,
    JOURNAL_VERSION,
};
pub use schema::{
    Catalog, ControlledVocabulary, ObjectTypeSchema, PropertyDefinition, ValueKind,
    VocabularyTerm, DATASET_TYPE_VOCAB, SAMPLE_TYPE_VOCAB, TECHNIQUE_VOCAB,
};
pub use validate::{
    composition_sums_to_100, validate_object, RuleId, ValidationReport, Violation,
    COMPOSITION_TOLERANCE,
};
