//! Operations shared by the command line and the HTTP API, so both surfaces
//! produce the same repository state for the same request.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use rdm_core::deck::{build_slide_deck, SlideDeck, SlideDeckRequest};
use rdm_core::extract::{detect_format, VendorFormat};
use rdm_core::graph::{build_graph, filter_by_element_within, Direction, ProvenanceGraph};
use rdm_core::model::{
    qr_payload, AuditEntry, Catalog, ControlledVocabulary, ObjectRecord, PermId, Properties, Repository,
    VocabularyTerm,
};
use rdm_core::store::{
    check_consistency, collect_garbage, regenerate_preview, register_linked_dataset, BlobStore,
    ConsistencyReport, DatasetRecord, GcReport, Registration,
};
use rdm_core::workflows::{
    prep_report, run_workflow, scheduler_tick, JobOutcome, ReportTable, PREP_REPORT, STRESS_STRAIN,
};
use rdm_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateObject {
    pub type_name: String,
    pub space: String,
    #[serde(default)]
    pub properties: Properties,
    #[serde(default)]
    pub parents: Vec<PermId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkRequest {
    pub parent: PermId,
    pub child: PermId,
}

/// Parser choice for an upload; `Auto` detects the vendor from the bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FormatChoice {
    #[default]
    Auto,
    Vendor(VendorFormat),
}

impl std::str::FromStr for FormatChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            Ok(FormatChoice::Auto)
        } else {
            s.parse().map(FormatChoice::Vendor)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ingest {
    pub entry: PermId,
    pub bytes: Vec<u8>,
    pub filename: String,
    pub format: FormatChoice,
    pub dataset_type: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphQuery {
    #[serde(default)]
    pub root: Option<PermId>,
    #[serde(default)]
    pub direction: Option<Direction>,
    #[serde(default)]
    pub depth: Option<usize>,
    /// Element symbol; selects the element filter instead of a root.
    #[serde(default)]
    pub element: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QrCode {
    pub perm_id: PermId,
    pub payload: String,
}

#[derive(Clone)]
pub struct Service {
    pub repo: Arc<Repository>,
    pub store: BlobStore,
}

impl Service {
    pub fn new(repo: Repository, store: BlobStore) -> Self {
        Service {
            repo: Arc::new(repo),
            store,
        }
    }

    /// Opens (creating if needed) the journal and blob directory.
    pub fn open(journal: &Path, blob_root: &Path) -> Result<Self> {
        if let Some(dir) = journal.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        }
        let repo = Repository::open(journal, Catalog::seeded())?;
        Ok(Service::new(repo, BlobStore::open_dir(blob_root)?))
    }

    pub fn in_memory() -> Self {
        Service::new(Repository::in_memory(Catalog::seeded()), BlobStore::in_memory())
    }

    pub fn create_object(&self, req: CreateObject) -> Result<Arc<ObjectRecord>> {
        self.repo
            .create_object(&req.type_name, &req.space, req.properties, &req.parents)
    }

    pub fn get_object(&self, id: &PermId) -> Result<Arc<ObjectRecord>> {
        self.repo.get_object(id)
    }

    pub fn list_objects(&self, type_name: Option<&str>) -> Vec<Arc<ObjectRecord>> {
        let state = self.repo.snapshot();
        state
            .objects()
            .filter(|o| type_name.is_none_or(|t| o.type_name == t))
            .cloned()
            .collect()
    }

    pub fn audit(&self, id: &PermId) -> Result<Vec<AuditEntry>> {
        let state = self.repo.snapshot();
        state.object(id)?;
        Ok(state.audit_trail(id).into_iter().cloned().collect())
    }

    pub fn link(&self, req: &LinkRequest) -> Result<()> {
        self.repo.link(&req.parent, &req.child)
    }

    pub fn vocabulary(&self, name: &str) -> Result<ControlledVocabulary> {
        self.repo.snapshot().catalog().vocabulary(name).cloned()
    }

    pub fn extend_vocabulary(&self, name: &str, term: VocabularyTerm) -> Result<ControlledVocabulary> {
        self.repo.extend_vocabulary(name, term)?;
        self.vocabulary(name)
    }

    pub fn ingest(&self, req: Ingest) -> Result<Arc<DatasetRecord>> {
        let parser = match req.format {
            FormatChoice::Auto => Some(detect_format(&req.bytes)),
            FormatChoice::Vendor(v) => Some(v),
        };
        let reg = Registration::new(req.entry, &req.bytes, &req.dataset_type, &req.filename).with_parser(parser);
        register_linked_dataset(&self.repo, &self.store, reg)
    }

    pub fn get_dataset(&self, id: &PermId) -> Result<Arc<DatasetRecord>> {
        self.repo.get_dataset(id)
    }

    pub fn list_datasets(&self, entry: Option<&PermId>) -> Result<Vec<Arc<DatasetRecord>>> {
        let state = self.repo.snapshot();
        Ok(match entry {
            Some(e) => {
                state.object(e)?;
                state.datasets_of(e).into_iter().cloned().collect()
            }
            None => state.datasets().cloned().collect(),
        })
    }

    pub fn dataset_blob(&self, id: &PermId) -> Result<(Arc<DatasetRecord>, Vec<u8>)> {
        let d = self.repo.get_dataset(id)?;
        let bytes = self.store.get_blob(&d.blob)?;
        Ok((d, bytes))
    }

    /// The stored preview PNG.
    pub fn preview(&self, id: &PermId) -> Result<Vec<u8>> {
        let d = self.repo.get_dataset(id)?;
        let p = d
            .preview
            .as_ref()
            .ok_or_else(|| Error::NotFound(format!("preview of dataset {id}")))?;
        self.store.get_blob(p)
    }

    /// Re-renders and stores the preview, returning the PNG.
    pub fn regenerate_preview(&self, id: &PermId) -> Result<Vec<u8>> {
        regenerate_preview(&self.repo, &self.store, id, Default::default())?;
        self.preview(id)
    }

    pub fn graph(&self, q: &GraphQuery) -> Result<ProvenanceGraph> {
        let state = self.repo.snapshot();
        match (&q.element, &q.root) {
            (Some(el), None) => filter_by_element_within(&state, el, q.depth),
            (None, Some(root)) => build_graph(&state, root, q.direction.unwrap_or(Direction::Both), q.depth),
            (Some(_), Some(_)) => Err(Error::Domain("give either a root or an element, not both".into())),
            (None, None) => Err(Error::Domain("a root or an element is required".into())),
        }
    }

    pub fn tick(&self) -> Result<Vec<JobOutcome>> {
        scheduler_tick(&self.repo, &self.store)
    }

    pub fn stress_strain(&self, entry: &PermId, force: bool) -> Result<JobOutcome> {
        run_workflow(&self.repo, &self.store, entry, STRESS_STRAIN, force)
    }

    /// Builds the table and attaches it to the entry unless an identical
    /// report is already there.
    pub fn prep_report(&self, entry: &PermId, force: bool) -> Result<(ReportTable, JobOutcome)> {
        let table = prep_report(&self.repo.snapshot(), entry)?;
        let outcome = run_workflow(&self.repo, &self.store, entry, PREP_REPORT, force)?;
        Ok((table, outcome))
    }

    pub fn deck(&self, req: &SlideDeckRequest) -> Result<SlideDeck> {
        build_slide_deck(&self.repo, &self.store, req)
    }

    pub fn qr(&self, id: &PermId) -> Result<QrCode> {
        self.repo.get_object(id)?;
        Ok(QrCode {
            perm_id: id.clone(),
            payload: qr_payload(id),
        })
    }

    pub fn check(&self) -> Result<ConsistencyReport> {
        check_consistency(&self.repo, &self.store)
    }

    pub fn gc(&self) -> Result<GcReport> {
        collect_garbage(&self.repo, &self.store)
    }
}
