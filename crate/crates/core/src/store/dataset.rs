use std::collections::BTreeSet;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::blob::{BlobRef, BlobStore};
use crate::error::{Error, Result};
use crate::extract::{detect_format, parse_file, RawKeyValues, UnifiedSemMetadata, VendorFormat};
use crate::model::{PermId, Repository, DATASET_TYPE_VOCAB};
use crate::par::Strategy;
use crate::previews::generate_preview;

/// How a derived dataset was produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Derivation {
    pub workflow: String,
    /// Idempotency key of the producing job.
    pub key: String,
    #[serde(default)]
    pub inputs: Vec<PermId>,
}

/// A registered file: its bytes live in the blob store, the record lives in
/// the repository, attached to an entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub dataset_id: PermId,
    pub owner_entry: PermId,
    pub dataset_type: String,
    pub blob: BlobRef,
    pub original_filename: String,
    pub vendor: VendorFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unified_metadata: Option<UnifiedSemMetadata>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_metadata: Option<RawKeyValues>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preview: Option<BlobRef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivation: Option<Derivation>,
    pub registered_at: DateTime<Utc>,
}

impl DatasetRecord {
    /// Filename without its extension.
    pub fn file_stem(&self) -> &str {
        let name = self.original_filename.rsplit(['/', '\\']).next().unwrap_or("");
        match name.rsplit_once('.') {
            Some((stem, _)) if !stem.is_empty() => stem,
            _ => name,
        }
    }
}

/// Input to [`register_linked_dataset`].
#[derive(Debug, Clone)]
pub struct Registration<'a> {
    pub owner_entry: PermId,
    pub bytes: &'a [u8],
    pub dataset_type: String,
    pub original_filename: String,
    /// Parser to run; `None` (or `Unknown`) registers the file without
    /// extraction.
    pub parser: Option<VendorFormat>,
    pub derivation: Option<Derivation>,
}

impl<'a> Registration<'a> {
    pub fn new(owner_entry: PermId, bytes: &'a [u8], dataset_type: &str, filename: &str) -> Self {
        Registration {
            owner_entry,
            bytes,
            dataset_type: dataset_type.to_string(),
            original_filename: filename.to_string(),
            parser: None,
            derivation: None,
        }
    }

    pub fn with_parser(mut self, parser: Option<VendorFormat>) -> Self {
        self.parser = parser;
        self
    }

    pub fn with_derivation(mut self, derivation: Derivation) -> Self {
        self.derivation = Some(derivation);
        self
    }
}

/// Stores the bytes, extracts metadata if a parser is chosen, renders a
/// preview, and records the dataset against its entry in one journal write.
///
/// Extraction and preview failures are downgraded to warnings on the record.
/// A failure after the blob is stored leaves an orphan blob for
/// [`collect_garbage`].
pub fn register_linked_dataset(
    repo: &Repository,
    store: &BlobStore,
    reg: Registration<'_>,
) -> Result<Arc<DatasetRecord>> {
    let snapshot = repo.snapshot();
    snapshot.object(&reg.owner_entry)?;
    snapshot
        .catalog()
        .require_term(DATASET_TYPE_VOCAB, &reg.dataset_type)?;

    let blob = store.put_blob(reg.bytes)?;
    let vendor = detect_format(reg.bytes);
    let mut warnings = Vec::new();
    let (mut unified, mut raw) = (None, None);
    if let Some(parser) = reg.parser.filter(|p| *p != VendorFormat::Unknown) {
        match parse_file(reg.bytes, parser) {
            Ok(result) => {
                warnings.extend(result.warnings);
                unified = Some(result.unified);
                raw = Some(result.raw);
            }
            Err(e) => warnings.push(format!("{parser} parser failed: {e}; registered without metadata")),
        }
    }
    let preview = match generate_preview(reg.bytes, vendor, &reg.dataset_type, Strategy::default()) {
        Ok(Some(png)) => Some(store.put_blob(&png)?),
        Ok(None) => None,
        Err(e) => {
            warnings.push(format!("preview not generated: {e}"));
            None
        }
    };
    repo.add_dataset(|dataset_id, registered_at| DatasetRecord {
        dataset_id,
        owner_entry: reg.owner_entry,
        dataset_type: reg.dataset_type,
        blob,
        original_filename: reg.original_filename,
        vendor,
        unified_metadata: unified,
        raw_metadata: raw,
        preview,
        warnings,
        derivation: reg.derivation,
        registered_at,
    })
}

/// Re-renders a dataset's preview from its stored bytes.
pub fn regenerate_preview(
    repo: &Repository,
    store: &BlobStore,
    dataset: &PermId,
    strategy: Strategy,
) -> Result<Arc<DatasetRecord>> {
    let record = repo.get_dataset(dataset)?;
    let bytes = store.get_blob(&record.blob)?;
    let png = generate_preview(&bytes, record.vendor, &record.dataset_type, strategy)?
        .ok_or_else(|| {
            Error::Domain(format!(
                "dataset {dataset} ({}) has no previewable content",
                record.dataset_type
            ))
        })?;
    let preview = store.put_blob(&png)?;
    let mut updated = (*record).clone();
    updated.preview = Some(preview);
    repo.update_dataset(updated)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub datasets_checked: usize,
    /// `(dataset, hash)` of referenced blobs that are absent.
    pub missing: Vec<(PermId, String)>,
    /// `(dataset, hash)` of referenced blobs that fail verification.
    pub corrupt: Vec<(PermId, String)>,
}

impl ConsistencyReport {
    pub fn ok(&self) -> bool {
        self.missing.is_empty() && self.corrupt.is_empty()
    }
}

/// Verifies every blob and preview referenced by a dataset record.
pub fn check_consistency(repo: &Repository, store: &BlobStore) -> Result<ConsistencyReport> {
    let snapshot = repo.snapshot();
    let mut report = ConsistencyReport::default();
    for d in snapshot.datasets() {
        report.datasets_checked += 1;
        for r in std::iter::once(&d.blob).chain(d.preview.as_ref()) {
            match store.get_blob(r) {
                Ok(_) => {}
                Err(Error::NotFound(_)) => report.missing.push((d.dataset_id.clone(), r.content_hash.clone())),
                Err(Error::Corrupt(_)) => report.corrupt.push((d.dataset_id.clone(), r.content_hash.clone())),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GcReport {
    pub removed: u64,
    pub bytes_freed: u64,
}

/// Deletes blobs no dataset record references. Run while no registration is
/// in flight, since a freshly stored blob is unreferenced until its record
/// is written.
pub fn collect_garbage(repo: &Repository, store: &BlobStore) -> Result<GcReport> {
    let snapshot = repo.snapshot();
    let live: BTreeSet<&str> = snapshot
        .datasets()
        .flat_map(|d| std::iter::once(&d.blob).chain(d.preview.as_ref()))
        .map(|r| r.content_hash.as_str())
        .collect();
    let mut report = GcReport::default();
    for (hash, size) in store.list()? {
        if !live.contains(hash.as_str()) && store.delete(&hash)? {
            report.removed += 1;
            report.bytes_freed += size;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::fixtures::demo_vendor_a;
    use crate::model::{Catalog, Properties};
    use serde_json::json;

    fn setup() -> (Repository, BlobStore, PermId) {
        let repo = Repository::in_memory(Catalog::seeded());
        let props: Properties = [("title".to_string(), json!("SEM session"))].into();
        let entry = repo
            .create_object("Experiment Entry", "CRC", props, &[])
            .unwrap()
            .perm_id
            .clone();
        (repo, BlobStore::in_memory(), entry)
    }

    #[test]
    fn vendor_a_with_parser_gets_metadata_and_preview() {
        let (repo, store, entry) = setup();
        let bytes = demo_vendor_a(320, 240, 20);
        let reg = Registration::new(entry.clone(), &bytes, "SEM_IMAGE", "pillar.va")
            .with_parser(Some(VendorFormat::VendorA));
        let d = register_linked_dataset(&repo, &store, reg).unwrap();
        assert_eq!(d.unified_metadata.as_ref().unwrap().acceleration_voltage, Some(20000.0));
        assert_eq!(d.vendor, VendorFormat::VendorA);
        assert!(d.preview.is_some());
        assert_eq!(store.get_blob(&d.blob).unwrap(), bytes);
        assert_eq!(repo.snapshot().datasets_of(&entry).len(), 1);
        assert!(check_consistency(&repo, &store).unwrap().ok());
    }

    #[test]
    fn no_parser_leaves_metadata_absent() {
        let (repo, store, entry) = setup();
        let reg = Registration::new(entry, b"arbitrary bytes", "OTHER", "notes.bin");
        let d = register_linked_dataset(&repo, &store, reg).unwrap();
        assert!(d.unified_metadata.is_none());
        assert_eq!(d.vendor, VendorFormat::Unknown);
    }

    #[test]
    fn failing_parser_is_a_warning() {
        let (repo, store, entry) = setup();
        let reg = Registration::new(entry, b"VNDB\x00\x01\x00\x00\x00\x00", "SEM_IMAGE", "b.vb")
            .with_parser(Some(VendorFormat::VendorA));
        let d = register_linked_dataset(&repo, &store, reg).unwrap();
        assert!(d.unified_metadata.is_none());
        assert!(d.warnings.iter().any(|w| w.contains("parser failed")));
    }

    #[test]
    fn unknown_owner_and_type() {
        let (repo, store, entry) = setup();
        let ghost = PermId::parse("20000101000000000-9").unwrap();
        let err = register_linked_dataset(&repo, &store, Registration::new(ghost, b"x", "OTHER", "x"))
            .unwrap_err();
        assert_eq!(err.code().as_str(), "NOTFOUND");
        let err = register_linked_dataset(&repo, &store, Registration::new(entry, b"x", "MOVIE", "x"))
            .unwrap_err();
        assert_eq!(err.code().as_str(), "VOCAB");
        assert_eq!(repo.snapshot().datasets().count(), 0);
    }

    #[test]
    fn gc_removes_only_orphans() {
        let (repo, store, entry) = setup();
        register_linked_dataset(&repo, &store, Registration::new(entry, b"kept", "OTHER", "k")).unwrap();
        store.put_blob(b"orphan").unwrap();
        let report = collect_garbage(&repo, &store).unwrap();
        assert_eq!(report, GcReport { removed: 1, bytes_freed: 6 });
        assert!(check_consistency(&repo, &store).unwrap().ok());
    }

    #[test]
    fn file_stem() {
        let (repo, store, entry) = setup();
        let d = register_linked_dataset(&repo, &store, Registration::new(entry, b"1", "OTHER", "dir/MP1.csv"))
            .unwrap();
        assert_eq!(d.file_stem(), "MP1");
    }
}
