//! Object repository: an in-memory index over an append-only JSON-lines
//! journal.
//!
//! Readers take an [`Arc<RepoState>`] snapshot and never block writers for
//! longer than a pointer swap. Writers are serialized through one mutex; each
//! commit validates against the current snapshot, appends exactly one journal
//! line, and only then publishes the new state.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::permid::mint_perm_id;
use super::record::{AuditEntry, ObjectRecord, Properties};
use super::schema::{Catalog, VocabularyTerm, DATASET_TYPE_VOCAB};
use super::validate::{validate_object, RuleId, ValidationReport, Violation};
use super::PermId;
use crate::error::{Error, Result};
use crate::store::DatasetRecord;

pub const JOURNAL_FORMAT: &str = "rdm-journal";
pub const JOURNAL_VERSION: u32 = 1;

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// A clock that only moves when told to. Used for reproducible ids.
#[derive(Debug)]
pub struct ManualClock(Mutex<DateTime<Utc>>);

impl ManualClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        ManualClock(Mutex::new(start))
    }

    pub fn advance(&self, by: chrono::Duration) {
        let mut t = self.0.lock().unwrap();
        *t += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.lock().unwrap()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct JournalHeader {
    format: String,
    version: u32,
}

/// Builds a dataset record once its id and timestamp are minted.
pub type DatasetBuilder<'a> = Box<dyn FnOnce(PermId, DateTime<Utc>) -> DatasetRecord + 'a>;

/// One journal line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum JournalEvent {
    PutObject {
        record: ObjectRecord,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        audit: Vec<AuditEntry>,
    },
    Link {
        parent: PermId,
        child: PermId,
    },
    PutDataset {
        record: Box<DatasetRecord>,
    },
    ExtendVocabulary {
        vocabulary: String,
        term: VocabularyTerm,
    },
    Batch {
        events: Vec<JournalEvent>,
    },
}

/// Immutable view of the repository at one point in time.
#[derive(Debug, Clone)]
pub struct RepoState {
    catalog: Catalog,
    objects: BTreeMap<PermId, Arc<ObjectRecord>>,
    datasets: BTreeMap<PermId, Arc<DatasetRecord>>,
    datasets_by_owner: BTreeMap<PermId, BTreeSet<PermId>>,
    audit: Vec<AuditEntry>,
    max_seq: u64,
}

impl RepoState {
    fn new(catalog: Catalog) -> Self {
        RepoState {
            catalog,
            objects: BTreeMap::new(),
            datasets: BTreeMap::new(),
            datasets_by_owner: BTreeMap::new(),
            audit: Vec::new(),
            max_seq: 0,
        }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn object(&self, id: &PermId) -> Result<&Arc<ObjectRecord>> {
        self.objects
            .get(id)
            .ok_or_else(|| Error::NotFound(format!("object {id}")))
    }

    pub fn dataset(&self, id: &PermId) -> Result<&Arc<DatasetRecord>> {
        self.datasets
            .get(id)
            .ok_or_else(|| Error::NotFound(format!("dataset {id}")))
    }

    pub fn contains(&self, id: &PermId) -> bool {
        self.objects.contains_key(id) || self.datasets.contains_key(id)
    }

    pub fn objects(&self) -> impl Iterator<Item = &Arc<ObjectRecord>> {
        self.objects.values()
    }

    pub fn objects_of_type<'a>(
        &'a self,
        type_name: &'a str,
    ) -> impl Iterator<Item = &'a Arc<ObjectRecord>> + 'a {
        self.objects.values().filter(move |o| o.type_name == type_name)
    }

    pub fn datasets(&self) -> impl Iterator<Item = &Arc<DatasetRecord>> {
        self.datasets.values()
    }

    /// Datasets registered against `entry`, in id order.
    pub fn datasets_of(&self, entry: &PermId) -> Vec<&Arc<DatasetRecord>> {
        self.datasets_by_owner
            .get(entry)
            .map(|ids| ids.iter().filter_map(|id| self.datasets.get(id)).collect())
            .unwrap_or_default()
    }

    pub fn audit_trail(&self, id: &PermId) -> Vec<&AuditEntry> {
        self.audit.iter().filter(|a| &a.perm_id == id).collect()
    }

    /// Transitive parents of `id` (excluding `id`).
    pub fn ancestors(&self, id: &PermId) -> BTreeSet<PermId> {
        self.closure(id, |r| &r.parents)
    }

    /// Transitive children of `id` (excluding `id`); objects only.
    pub fn descendants(&self, id: &PermId) -> BTreeSet<PermId> {
        self.closure(id, |r| &r.children)
    }

    fn closure(
        &self,
        id: &PermId,
        next: impl Fn(&ObjectRecord) -> &BTreeSet<PermId>,
    ) -> BTreeSet<PermId> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([id.clone()]);
        while let Some(cur) = queue.pop_front() {
            if let Some(rec) = self.objects.get(&cur) {
                for n in next(rec) {
                    if seen.insert(n.clone()) {
                        queue.push_back(n.clone());
                    }
                }
            }
        }
        seen.remove(id);
        seen
    }

    pub fn validate(&self, record: &ObjectRecord) -> Result<ValidationReport> {
        let schema = self.catalog.schema(&record.type_name)?;
        validate_object(record, schema, self.catalog.vocabularies())
    }

    fn next_perm_id(&self, now: DateTime<Utc>, reserved: &BTreeSet<PermId>) -> PermId {
        let mut seq = self.max_seq + 1;
        loop {
            let id = mint_perm_id(now, seq);
            if !self.contains(&id) && !reserved.contains(&id) {
                return id;
            }
            seq += 1;
        }
    }

    fn apply(&mut self, event: JournalEvent) -> Result<()> {
        match event {
            JournalEvent::PutObject { mut record, audit } => {
                self.max_seq = self.max_seq.max(record.perm_id.seq());
                match self.objects.get(&record.perm_id) {
                    Some(existing) => {
                        record.parents = existing.parents.clone();
                        record.children = existing.children.clone();
                        record.registered_at = existing.registered_at;
                    }
                    None => {
                        record.parents.clear();
                        record.children.clear();
                    }
                }
                self.objects.insert(record.perm_id.clone(), Arc::new(record));
                self.audit.extend(audit);
            }
            JournalEvent::Link { parent, child } => {
                if !self.objects.contains_key(&parent) || !self.objects.contains_key(&child) {
                    return Err(Error::Journal(format!(
                        "link {parent} -> {child} references an unknown object"
                    )));
                }
                Arc::make_mut(self.objects.get_mut(&parent).unwrap())
                    .children
                    .insert(child.clone());
                Arc::make_mut(self.objects.get_mut(&child).unwrap())
                    .parents
                    .insert(parent);
            }
            JournalEvent::PutDataset { record } => {
                self.max_seq = self.max_seq.max(record.dataset_id.seq());
                if !self.objects.contains_key(&record.owner_entry) {
                    return Err(Error::Journal(format!(
                        "dataset {} references unknown entry {}",
                        record.dataset_id, record.owner_entry
                    )));
                }
                self.datasets_by_owner
                    .entry(record.owner_entry.clone())
                    .or_default()
                    .insert(record.dataset_id.clone());
                self.datasets.insert(record.dataset_id.clone(), Arc::new(*record));
            }
            JournalEvent::ExtendVocabulary { vocabulary, term } => {
                self.catalog.extend_vocabulary(&vocabulary, term)?;
            }
            JournalEvent::Batch { events } => {
                for e in events {
                    self.apply(e)?;
                }
            }
        }
        Ok(())
    }

    /// Checks every invariant that spans records: link symmetry and
    /// acyclicity. Returns the list of problems found.
    pub fn integrity_problems(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for rec in self.objects.values() {
            for c in &rec.children {
                match self.objects.get(c) {
                    Some(child) if child.parents.contains(&rec.perm_id) => {}
                    _ => problems.push(format!("{} lists {c} as child asymmetrically", rec.perm_id)),
                }
            }
            for p in &rec.parents {
                match self.objects.get(p) {
                    Some(parent) if parent.children.contains(&rec.perm_id) => {}
                    _ => problems.push(format!("{} lists {p} as parent asymmetrically", rec.perm_id)),
                }
            }
        }
        if self.topological_order().is_none() {
            problems.push("parent-child relation contains a cycle".into());
        }
        problems
    }

    /// Kahn topological order over objects, `None` if a cycle exists.
    pub fn topological_order(&self) -> Option<Vec<PermId>> {
        let mut indegree: BTreeMap<&PermId, usize> = self
            .objects
            .iter()
            .map(|(id, r)| (id, r.parents.len()))
            .collect();
        let mut ready: VecDeque<&PermId> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(id, _)| *id)
            .collect();
        let mut order = Vec::with_capacity(self.objects.len());
        while let Some(id) = ready.pop_front() {
            order.push(id.clone());
            for c in &self.objects[id].children {
                let d = indegree.get_mut(c)?;
                *d -= 1;
                if *d == 0 {
                    ready.push_back(c);
                }
            }
        }
        (order.len() == self.objects.len()).then_some(order)
    }
}

struct Writer {
    journal: Option<File>,
}

impl Writer {
    fn append(&mut self, event: &JournalEvent) -> Result<()> {
        let Some(file) = self.journal.as_mut() else {
            return Ok(());
        };
        let mut line = serde_json::to_string(event)
            .map_err(|e| Error::Journal(format!("cannot encode event: {e}")))?;
        line.push('\n');
        file.write_all(line.as_bytes())
            .and_then(|_| file.sync_data())
            .map_err(|e| Error::io("appending to journal", e))
    }
}

pub struct Repository {
    state: RwLock<Arc<RepoState>>,
    writer: Mutex<Writer>,
    clock: Arc<dyn Clock>,
    actor: String,
    path: Option<PathBuf>,
}

impl std::fmt::Debug for Repository {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Repository")
            .field("path", &self.path)
            .field("actor", &self.actor)
            .finish_non_exhaustive()
    }
}

impl Repository {
    pub fn in_memory(catalog: Catalog) -> Self {
        Repository {
            state: RwLock::new(Arc::new(RepoState::new(catalog))),
            writer: Mutex::new(Writer { journal: None }),
            clock: Arc::new(SystemClock),
            actor: "rdm".into(),
            path: None,
        }
    }

    /// Opens (or creates) a journal file and replays it.
    ///
    /// The journal is locked exclusively for the lifetime of the repository.
    /// A torn final line left by an interrupted append is ignored.
    pub fn open(path: impl AsRef<Path>, catalog: Catalog) -> Result<Self> {
        let path = path.as_ref();
        let ctx = |what: &str| format!("{what} {}", path.display());
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(|e| Error::io(ctx("opening journal"), e))?;
        file.try_lock()
            .map_err(|_| Error::Busy(ctx("journal is locked by another process:")))?;

        let mut state = RepoState::new(catalog);
        let len = file
            .metadata()
            .map_err(|e| Error::io(ctx("reading journal"), e))?
            .len();
        if len == 0 {
            let header = JournalHeader {
                format: JOURNAL_FORMAT.into(),
                version: JOURNAL_VERSION,
            };
            let mut line = serde_json::to_string(&header).expect("header encodes");
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|_| file.sync_data())
                .map_err(|e| Error::io(ctx("writing journal header to"), e))?;
        } else {
            replay(&file, &mut state, path)?;
        }

        Ok(Repository {
            state: RwLock::new(Arc::new(state)),
            writer: Mutex::new(Writer {
                journal: Some(file),
            }),
            clock: Arc::new(SystemClock),
            actor: "rdm".into(),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_actor(mut self, actor: impl Into<String>) -> Self {
        self.actor = actor.into();
        self
    }

    pub fn journal_path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    pub fn snapshot(&self) -> Arc<RepoState> {
        self.state.read().unwrap().clone()
    }

    fn lock_writer(&self) -> MutexGuard<'_, Writer> {
        self.writer.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Runs `plan` against the current state while holding the writer lock.
    /// The produced event is applied to a copy, journaled, then published.
    fn commit<T>(&self, plan: impl FnOnce(&RepoState) -> Result<(JournalEvent, T)>) -> Result<T> {
        let mut writer = self.lock_writer();
        let current = self.snapshot();
        let (event, out) = plan(&current)?;
        let mut next = (*current).clone();
        next.apply(event.clone())?;
        writer.append(&event)?;
        *self.state.write().unwrap() = Arc::new(next);
        Ok(out)
    }

    pub fn get_object(&self, id: &PermId) -> Result<Arc<ObjectRecord>> {
        self.snapshot().object(id).cloned()
    }

    pub fn get_dataset(&self, id: &PermId) -> Result<Arc<DatasetRecord>> {
        self.snapshot().dataset(id).cloned()
    }

    /// Mints an id, validates and stores a new object, and links it under
    /// `parents`, all as one journal line.
    pub fn create_object(
        &self,
        type_name: &str,
        space: &str,
        properties: Properties,
        parents: &[PermId],
    ) -> Result<Arc<ObjectRecord>> {
        let now = self.clock.now();
        let id = self.commit(|state| {
            let id = state.next_perm_id(now, &BTreeSet::new());
            let record = ObjectRecord::new(id.clone(), type_name, space, properties, now);
            state.validate(&record)?.into_result()?;
            for p in parents {
                state.object(p)?;
            }
            let mut events = vec![JournalEvent::PutObject {
                record,
                audit: Vec::new(),
            }];
            let unique: BTreeSet<_> = parents.iter().cloned().collect();
            events.extend(unique.into_iter().map(|parent| JournalEvent::Link {
                parent,
                child: id.clone(),
            }));
            let event = if events.len() == 1 {
                events.pop().unwrap()
            } else {
                JournalEvent::Batch { events }
            };
            Ok((event, id))
        })?;
        self.get_object(&id)
    }

    /// Stores a record under its existing id. Creating a record with a new
    /// id is allowed (import); for an existing id, mutable properties are
    /// replaced and an audit entry is written per changed property. Link sets
    /// in `record` are ignored; use [`Repository::link`].
    pub fn put_object(&self, record: ObjectRecord) -> Result<PermId> {
        let now = self.clock.now();
        let actor = self.actor.clone();
        self.commit(|state| {
            let report = state.validate(&record)?;
            let mut violations = report.violations;
            let mut audit = Vec::new();
            if let Some(existing) = state.objects.get(&record.perm_id) {
                if existing.type_name != record.type_name {
                    violations.push(Violation {
                        property_name: "type_name".into(),
                        rule_id: RuleId::TypeImmutable,
                        message: format!(
                            "object {} is a {}, not a {}",
                            record.perm_id, existing.type_name, record.type_name
                        ),
                    });
                }
                let names: BTreeSet<&String> = existing
                    .properties
                    .keys()
                    .chain(record.properties.keys())
                    .collect();
                for name in names {
                    let old = existing.properties.get(name);
                    let new = record.properties.get(name);
                    if old != new {
                        audit.push(AuditEntry {
                            timestamp: now,
                            actor: actor.clone(),
                            perm_id: record.perm_id.clone(),
                            property: name.clone(),
                            old: old.cloned(),
                            new: new.cloned(),
                        });
                    }
                }
            }
            ValidationReport::from_violations(violations).into_result()?;
            let mut stored = record.clone();
            stored.parents.clear();
            stored.children.clear();
            Ok((
                JournalEvent::PutObject {
                    record: stored,
                    audit,
                },
                record.perm_id.clone(),
            ))
        })
    }

    /// Adds a parent -> child edge, rejecting self-links and cycles.
    pub fn link(&self, parent: &PermId, child: &PermId) -> Result<()> {
        self.commit(|state| {
            state.object(parent)?;
            state.object(child)?;
            let cycle = || Error::Cycle {
                parent: parent.to_string(),
                child: child.to_string(),
            };
            if parent == child || state.descendants(child).contains(parent) {
                return Err(cycle());
            }
            Ok((
                JournalEvent::Link {
                    parent: parent.clone(),
                    child: child.clone(),
                },
                (),
            ))
        })
    }

    /// Mints a dataset id and stores the record built by `build`.
    pub fn add_dataset(
        &self,
        build: impl FnOnce(PermId, DateTime<Utc>) -> DatasetRecord,
    ) -> Result<Arc<DatasetRecord>> {
        let now = self.clock.now();
        let id = self.commit(|state| {
            let id = state.next_perm_id(now, &BTreeSet::new());
            let record = build(id.clone(), now);
            check_dataset(state, &record)?;
            Ok((JournalEvent::PutDataset { record: Box::new(record) }, id))
        })?;
        self.get_dataset(&id)
    }

    /// Stores several datasets minted in one commit.
    pub fn add_datasets(
        &self,
        builders: Vec<DatasetBuilder<'_>>,
    ) -> Result<Vec<Arc<DatasetRecord>>> {
        if builders.is_empty() {
            return Ok(Vec::new());
        }
        let now = self.clock.now();
        let ids = self.commit(|state| {
            let mut reserved = BTreeSet::new();
            let mut events = Vec::new();
            for build in builders {
                let id = state.next_perm_id(now, &reserved);
                reserved.insert(id.clone());
                let record = build(id, now);
                check_dataset(state, &record)?;
                events.push(JournalEvent::PutDataset { record: Box::new(record) });
            }
            Ok((JournalEvent::Batch { events }, reserved))
        })?;
        let snap = self.snapshot();
        ids.iter().map(|id| snap.dataset(id).cloned()).collect()
    }

    /// Replaces an existing dataset record (e.g. after regenerating its
    /// preview).
    pub fn update_dataset(&self, record: DatasetRecord) -> Result<Arc<DatasetRecord>> {
        let id = record.dataset_id.clone();
        self.commit(|state| {
            let existing = state.dataset(&record.dataset_id)?;
            if existing.owner_entry != record.owner_entry {
                return Err(Error::Domain(format!(
                    "dataset {} cannot change its owner entry",
                    record.dataset_id
                )));
            }
            check_dataset(state, &record)?;
            Ok((JournalEvent::PutDataset { record: Box::new(record) }, ()))
        })?;
        self.get_dataset(&id)
    }

    pub fn extend_vocabulary(&self, vocabulary: &str, term: VocabularyTerm) -> Result<()> {
        self.commit(|state| {
            let mut probe = state.catalog.clone();
            probe.extend_vocabulary(vocabulary, term.clone())?;
            Ok((
                JournalEvent::ExtendVocabulary {
                    vocabulary: vocabulary.to_string(),
                    term,
                },
                (),
            ))
        })
    }
}

fn check_dataset(state: &RepoState, record: &DatasetRecord) -> Result<()> {
    state.object(&record.owner_entry)?;
    state
        .catalog
        .require_term(DATASET_TYPE_VOCAB, &record.dataset_type)?;
    Ok(())
}

fn replay(file: &File, state: &mut RepoState, path: &Path) -> Result<()> {
    let mut reader = BufReader::new(file);
    let mut lines = Vec::new();
    loop {
        let mut buf = String::new();
        let n = reader
            .read_line(&mut buf)
            .map_err(|e| Error::io(format!("reading journal {}", path.display()), e))?;
        if n == 0 {
            break;
        }
        lines.push(buf);
    }
    let mut iter = lines.iter().enumerate().peekable();
    let (_, header_line) = iter
        .next()
        .ok_or_else(|| Error::Journal("journal is empty".into()))?;
    let header: JournalHeader = serde_json::from_str(header_line.trim_end())
        .map_err(|e| Error::Journal(format!("bad journal header: {e}")))?;
    if header.format != JOURNAL_FORMAT || header.version != JOURNAL_VERSION {
        return Err(Error::Journal(format!(
            "unsupported journal {} v{}",
            header.format, header.version
        )));
    }
    while let Some((idx, line)) = iter.next() {
        let is_last = iter.peek().is_none();
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<JournalEvent>(line.trim_end()) {
            Ok(event) => state.apply(event)?,
            // An interrupted append leaves a final line without its newline.
            Err(_) if is_last && !line.ends_with('\n') => break,
            Err(e) => {
                return Err(Error::Journal(format!("line {}: {e}", idx + 1)));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn props(v: serde_json::Value) -> Properties {
        v.as_object().unwrap().clone().into_iter().collect()
    }

    fn sample_props(fe: f64, al: f64) -> Properties {
        props(json!({
            "name": "FeAl",
            "sample_category": "BULK",
            "dimensions_mm": [10.0, 10.0, 2.0],
            "location": "Lab 1",
            "composition": {"Fe": fe, "Al": al},
        }))
    }

    fn protocol(repo: &Repository, name: &str) -> PermId {
        repo.create_object("Protocol", "CRC", props(json!({ "name": name })), &[])
            .unwrap()
            .perm_id
            .clone()
    }

    #[test]
    fn create_and_get_round_trip() {
        let repo = Repository::in_memory(Catalog::seeded());
        let rec = repo
            .create_object("Sample", "CRC", sample_props(60.0, 40.0), &[])
            .unwrap();
        let back = repo.get_object(&rec.perm_id).unwrap();
        assert_eq!(*back, *rec);
    }

    #[test]
    fn invalid_sample_rejected_and_repo_unchanged() {
        let repo = Repository::in_memory(Catalog::seeded());
        let before = repo.snapshot().objects().count();
        let err = repo
            .create_object("Sample", "CRC", sample_props(60.0, 39.0), &[])
            .unwrap_err();
        let report = err.validation_report().unwrap();
        assert!(report.has("composition", RuleId::Sum100));
        assert_eq!(repo.snapshot().objects().count(), before);
    }

    #[test]
    fn re_put_updates_properties_and_keeps_id() {
        let repo = Repository::in_memory(Catalog::seeded());
        let rec = repo
            .create_object("Sample", "CRC", sample_props(60.0, 40.0), &[])
            .unwrap();
        let mut changed = (*rec).clone();
        changed
            .properties
            .insert("location".into(), json!("Cabinet 4"));
        let id = repo.put_object(changed).unwrap();
        assert_eq!(id, rec.perm_id);
        let back = repo.get_object(&id).unwrap();
        assert_eq!(back.text("location"), Some("Cabinet 4"));
        let trail = repo.snapshot().audit_trail(&id).into_iter().cloned().collect::<Vec<_>>();
        assert_eq!(trail.len(), 1);
        assert_eq!(trail[0].property, "location");
        assert_eq!(trail[0].old, Some(json!("Lab 1")));
    }

    #[test]
    fn type_change_rejected() {
        let repo = Repository::in_memory(Catalog::seeded());
        let p = protocol(&repo, "Polish");
        let mut rec = (*repo.get_object(&p).unwrap()).clone();
        rec.type_name = "Device".into();
        rec.properties = props(json!({"model": "X"}));
        let err = repo.put_object(rec).unwrap_err();
        assert!(err.validation_report().unwrap().has("type_name", RuleId::TypeImmutable));
    }

    #[test]
    fn chain_and_two_cycle() {
        let repo = Repository::in_memory(Catalog::seeded());
        let a = protocol(&repo, "A");
        let b = protocol(&repo, "B");
        let c = protocol(&repo, "C");
        repo.link(&a, &b).unwrap();
        repo.link(&b, &c).unwrap();
        assert_eq!(repo.snapshot().ancestors(&c), BTreeSet::from([a.clone(), b.clone()]));
        let err = repo.link(&b, &a).unwrap_err();
        assert_eq!(err.code().as_str(), "CYCLE");
        let err = repo.link(&a, &a).unwrap_err();
        assert_eq!(err.code().as_str(), "CYCLE");
        assert!(repo.snapshot().integrity_problems().is_empty());
    }

    #[test]
    fn diamond_is_allowed() {
        let repo = Repository::in_memory(Catalog::seeded());
        let [a, b, c, d] = ["A", "B", "C", "D"].map(|n| protocol(&repo, n));
        repo.link(&a, &b).unwrap();
        repo.link(&a, &c).unwrap();
        repo.link(&b, &d).unwrap();
        repo.link(&c, &d).unwrap();
        let snap = repo.snapshot();
        assert_eq!(snap.object(&d).unwrap().parents.len(), 2);
        assert_eq!(snap.ancestors(&d).len(), 3);
        assert!(snap.integrity_problems().is_empty());
    }

    #[test]
    fn unknown_objects_are_not_found() {
        let repo = Repository::in_memory(Catalog::seeded());
        let a = protocol(&repo, "A");
        let ghost = PermId::parse("20000101000000000-99").unwrap();
        assert_eq!(repo.link(&a, &ghost).unwrap_err().code().as_str(), "NOTFOUND");
        assert_eq!(repo.get_object(&ghost).unwrap_err().code().as_str(), "NOTFOUND");
        let err = repo
            .create_object("Widget", "CRC", Properties::new(), &[])
            .unwrap_err();
        assert_eq!(err.code().as_str(), "SCHEMA_NOT_FOUND");
    }

    #[test]
    fn ids_unique_under_frozen_clock() {
        let clock = Arc::new(ManualClock::new(DateTime::<Utc>::UNIX_EPOCH));
        let repo = Repository::in_memory(Catalog::seeded()).with_clock(clock);
        let ids: BTreeSet<_> = (0..20).map(|i| protocol(&repo, &format!("p{i}"))).collect();
        assert_eq!(ids.len(), 20);
        assert!(ids.iter().all(|id| id.timestamp_digits() == "19700101000000000"));
    }

    #[test]
    fn journal_replays_to_same_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("repo.jsonl");
        let (a, b);
        {
            let repo = Repository::open(&path, Catalog::seeded()).unwrap();
            a = protocol(&repo, "A");
            b = repo
                .create_object("Sample", "CRC", sample_props(60.0, 40.0), std::slice::from_ref(&a))
                .unwrap()
                .perm_id
                .clone();
            let mut changed = (*repo.get_object(&b).unwrap()).clone();
            changed.properties.insert("notes".into(), json!("cut"));
            repo.put_object(changed).unwrap();
            repo.extend_vocabulary(
                "SAMPLE_TYPE",
                VocabularyTerm {
                    code: "WIRE".into(),
                    label: "Wire".into(),
                    description: String::new(),
                },
            )
            .unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("{\"format\":\"rdm-journal\",\"version\":1}\n"));

        let repo = Repository::open(&path, Catalog::seeded()).unwrap();
        let snap = repo.snapshot();
        assert_eq!(snap.object(&b).unwrap().parents, BTreeSet::from([a.clone()]));
        assert_eq!(snap.object(&a).unwrap().children, BTreeSet::from([b.clone()]));
        assert_eq!(snap.object(&b).unwrap().text("notes"), Some("cut"));
        assert_eq!(snap.audit_trail(&b).len(), 1);
        assert!(snap.catalog().vocabulary("SAMPLE_TYPE").unwrap().contains("WIRE"));
        // fresh ids never collide with replayed ones
        let c = protocol(&repo, "C");
        assert!(c.seq() > b.seq());
    }

    #[test]
    fn torn_tail_is_ignored_but_corruption_is_not() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("repo.jsonl");
        {
            let repo = Repository::open(&path, Catalog::seeded()).unwrap();
            protocol(&repo, "A");
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"op\":\"put_obj").unwrap();
        drop(f);
        let repo = Repository::open(&path, Catalog::seeded()).unwrap();
        assert_eq!(repo.snapshot().objects().count(), 1);
        drop(repo);

        std::fs::write(&path, "{\"format\":\"rdm-journal\",\"version\":1}\ngarbage\n{}\n").unwrap();
        let err = Repository::open(&path, Catalog::seeded()).unwrap_err();
        assert_eq!(err.code().as_str(), "JOURNAL");
    }

    #[test]
    fn second_open_is_busy() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("repo.jsonl");
        let _repo = Repository::open(&path, Catalog::seeded()).unwrap();
        let err = Repository::open(&path, Catalog::seeded()).unwrap_err();
        assert_eq!(err.code().as_str(), "BUSY");
    }

    #[test]
    fn concurrent_readers_see_whole_records() {
        let repo = Arc::new(Repository::in_memory(Catalog::seeded()));
        let writer = {
            let repo = repo.clone();
            std::thread::spawn(move || {
                for i in 0..50 {
                    protocol(&repo, &format!("p{i}"));
                }
            })
        };
        let readers: Vec<_> = (0..4)
            .map(|_| {
                let repo = repo.clone();
                std::thread::spawn(move || {
                    for _ in 0..200 {
                        let snap = repo.snapshot();
                        for o in snap.objects() {
                            assert!(o.text("name").is_some());
                        }
                    }
                })
            })
            .collect();
        writer.join().unwrap();
        for r in readers {
            r.join().unwrap();
        }
        assert_eq!(repo.snapshot().objects().count(), 50);
    }
}
