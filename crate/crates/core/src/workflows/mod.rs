//! Automated analysis and reporting over registered entries, driven by an
//! idempotent scheduler.
//!
//! A tick plans every eligible job from one repository snapshot, computes
//! the outputs (in parallel with the `parallel` feature), then writes each
//! job's datasets in a single journal batch.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::extract::VendorFormat;
use crate::model::{DatasetBuilder, ObjectRecord, PermId, RepoState, Repository};
use crate::par::{self, Strategy};
use crate::previews::generate_preview;
use crate::store::{sha256_hex, BlobStore, DatasetRecord, Derivation};

mod mechanics;
mod plot;
mod report;

pub use mechanics::{
    curve_csv, demo_load_rows, parse_geometry_csv, parse_load_csv, stress_strain, write_geometry_csv,
    write_load_csv, CurvePoint, LoadDisplacementSeries, LoadSample, PillarGeometry, StressStrainCurve,
    GEOMETRY_CSV_HEADER, LOAD_CSV_HEADER,
};
pub use plot::{render_curve, render_curve_with, Rgb, PALETTE};
pub use report::{
    escape_html, preparation_steps, prep_report, ReportTable, PREP_COLUMNS, PREP_ENTRY_TYPE,
    PREP_STEP_TYPE,
};

pub const STRESS_STRAIN: &str = "stress-strain";
pub const PREP_REPORT: &str = "prep-report";
pub const MICRO_MECH_TYPE: &str = "Micro Mech Exp";
pub const LOAD_DATASET_TYPE: &str = "LOAD_DISPLACEMENT";
pub const GEOMETRY_DATASET_TYPE: &str = "PILLAR_GEOMETRY";
pub const DERIVED_DATASET_TYPE: &str = "DERIVED_FIGURE";

pub const REASON_EXECUTED: &str = "executed";
pub const REASON_UP_TO_DATE: &str = "up to date";
pub const REASON_MISSING_INPUT: &str = "missing input";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobOutcome {
    pub entry: PermId,
    pub workflow_name: String,
    pub produced_datasets: Vec<PermId>,
    pub skipped: bool,
    pub reason: String,
}

impl JobOutcome {
    fn skip(entry: &PermId, workflow: &str, reason: &str) -> Self {
        JobOutcome {
            entry: entry.clone(),
            workflow_name: workflow.to_string(),
            produced_datasets: Vec::new(),
            skipped: true,
            reason: reason.to_string(),
        }
    }

    fn failed(entry: &PermId, workflow: &str, err: &Error) -> Self {
        JobOutcome {
            entry: entry.clone(),
            workflow_name: workflow.to_string(),
            produced_datasets: Vec::new(),
            skipped: false,
            reason: format!("failed: {err}"),
        }
    }

    pub fn executed(&self) -> bool {
        !self.skipped && self.reason == REASON_EXECUTED
    }

    pub fn is_failure(&self) -> bool {
        self.reason.starts_with("failed")
    }
}

/// Number of outcomes that actually ran and produced output.
pub fn executed_count(outcomes: &[JobOutcome]) -> usize {
    outcomes.iter().filter(|o| o.executed()).count()
}

/// Where a job reads its geometry table from.
#[derive(Debug, Clone)]
enum GeometrySource {
    Dataset(Arc<DatasetRecord>),
    Property(String),
}

#[derive(Debug, Clone)]
enum JobInput {
    StressStrain {
        loads: Vec<Arc<DatasetRecord>>,
        geometry: GeometrySource,
    },
    PrepReport(ReportTable),
}

#[derive(Debug, Clone)]
struct Job {
    entry: PermId,
    workflow: &'static str,
    key: String,
    inputs: Vec<PermId>,
    input: JobInput,
}

struct Output {
    filename: String,
    bytes: Vec<u8>,
}

/// sha256 over entry, workflow and the sorted input hashes.
pub fn idempotency_key(entry: &PermId, workflow: &str, input_hashes: &[String]) -> String {
    let mut hashes = input_hashes.to_vec();
    hashes.sort();
    let mut h = Sha256::new();
    h.update(entry.as_str().as_bytes());
    h.update(b"\n");
    h.update(workflow.as_bytes());
    for x in &hashes {
        h.update(b"\n");
        h.update(x.as_bytes());
    }
    hex::encode(h.finalize())
}

fn up_to_date(state: &RepoState, entry: &PermId, workflow: &str, key: &str) -> bool {
    state.datasets_of(entry).iter().any(|d| {
        d.derivation
            .as_ref()
            .is_some_and(|dv| dv.workflow == workflow && dv.key == key)
    })
}

/// Latest dataset of `dataset_type` per filename stem.
fn latest_by_stem(state: &RepoState, entry: &PermId, dataset_type: &str) -> Vec<Arc<DatasetRecord>> {
    let mut by_stem: BTreeMap<String, Arc<DatasetRecord>> = BTreeMap::new();
    for d in state.datasets_of(entry) {
        if d.dataset_type != dataset_type {
            continue;
        }
        let newer = by_stem
            .get(d.file_stem())
            .is_none_or(|cur| cur.dataset_id < d.dataset_id);
        if newer {
            by_stem.insert(d.file_stem().to_string(), d.clone());
        }
    }
    by_stem.into_values().collect()
}

fn plan_stress_strain(state: &RepoState, entry: &ObjectRecord) -> std::result::Result<Job, &'static str> {
    let id = &entry.perm_id;
    let loads = latest_by_stem(state, id, LOAD_DATASET_TYPE);
    let geometry = state
        .datasets_of(id)
        .into_iter()
        .filter(|d| d.dataset_type == GEOMETRY_DATASET_TYPE)
        .max_by(|a, b| a.dataset_id.cmp(&b.dataset_id))
        .map(|d| GeometrySource::Dataset(d.clone()))
        .or_else(|| {
            entry
                .text("pillar_geometry")
                .filter(|t| !t.trim().is_empty())
                .map(|t| GeometrySource::Property(t.to_string()))
        });
    let Some(geometry) = geometry else {
        return Err(REASON_MISSING_INPUT);
    };
    if loads.is_empty() {
        return Err(REASON_MISSING_INPUT);
    }
    let mut hashes: Vec<String> = loads.iter().map(|d| d.blob.content_hash.clone()).collect();
    let mut inputs: Vec<PermId> = loads.iter().map(|d| d.dataset_id.clone()).collect();
    match &geometry {
        GeometrySource::Dataset(d) => {
            hashes.push(d.blob.content_hash.clone());
            inputs.push(d.dataset_id.clone());
        }
        GeometrySource::Property(text) => hashes.push(sha256_hex(text.as_bytes())),
    }
    Ok(Job {
        entry: id.clone(),
        workflow: STRESS_STRAIN,
        key: idempotency_key(id, STRESS_STRAIN, &hashes),
        inputs,
        input: JobInput::StressStrain { loads, geometry },
    })
}

fn plan_prep_report(state: &RepoState, entry: &ObjectRecord) -> Result<std::result::Result<Job, &'static str>> {
    let id = &entry.perm_id;
    let steps = preparation_steps(state, id)?;
    if steps.is_empty() {
        return Ok(Err(REASON_MISSING_INPUT));
    }
    let mut hashes = Vec::new();
    for s in &steps {
        let rec = state.object(s)?;
        let canonical = serde_json::to_vec(&rec.properties).expect("properties serialize");
        hashes.push(format!("{s}:{}", sha256_hex(&canonical)));
    }
    let table = prep_report(state, id)?;
    Ok(Ok(Job {
        entry: id.clone(),
        workflow: PREP_REPORT,
        key: idempotency_key(id, PREP_REPORT, &hashes),
        inputs: Vec::new(),
        input: JobInput::PrepReport(table),
    }))
}

fn plan(state: &RepoState, entry: &ObjectRecord, workflow: &str) -> Result<std::result::Result<Job, &'static str>> {
    match workflow {
        STRESS_STRAIN => Ok(plan_stress_strain(state, entry)),
        PREP_REPORT => plan_prep_report(state, entry),
        other => Err(Error::NotFound(format!("workflow `{other}`"))),
    }
}

/// The workflow that applies to an entry type.
pub fn workflow_for_type(type_name: &str) -> Option<&'static str> {
    match type_name {
        MICRO_MECH_TYPE => Some(STRESS_STRAIN),
        PREP_ENTRY_TYPE => Some(PREP_REPORT),
        _ => None,
    }
}

fn compute(job: &Job, store: &BlobStore) -> Result<Vec<Output>> {
    match &job.input {
        JobInput::PrepReport(table) => Ok(vec![
            Output {
                filename: "prep_report.html".into(),
                bytes: table.to_html().into_bytes(),
            },
            Output {
                filename: "prep_report.txt".into(),
                bytes: table.to_text().into_bytes(),
            },
        ]),
        JobInput::StressStrain { loads, geometry } => {
            let geometry_rows = match geometry {
                GeometrySource::Dataset(d) => parse_geometry_csv(&store.get_blob(&d.blob)?)?,
                GeometrySource::Property(text) => parse_geometry_csv(text.as_bytes())?,
            };
            let mut outputs = Vec::new();
            for (i, load) in loads.iter().enumerate() {
                let pillar = load.file_stem();
                let geom = geometry_rows
                    .iter()
                    .find(|g| g.pillar_id == pillar)
                    .or(match geometry_rows.as_slice() {
                        [only] if loads.len() == 1 => Some(only),
                        _ => None,
                    })
                    .ok_or_else(|| Error::Domain(format!("no geometry row for pillar `{pillar}`")))?;
                let series = parse_load_csv(&store.get_blob(&load.blob)?)?;
                let mut curve = stress_strain(&series, geom)?;
                curve.source_dataset = Some(load.dataset_id.clone());
                outputs.push(Output {
                    filename: format!("{pillar}_stress_strain.png"),
                    bytes: render_curve_with(&curve, PALETTE[i % PALETTE.len()])?,
                });
            }
            Ok(outputs)
        }
    }
}

/// Stores the outputs and records them against the entry in one batch.
fn write(repo: &Repository, store: &BlobStore, job: &Job, outputs: Vec<Output>) -> Result<Vec<PermId>> {
    let mut staged = Vec::new();
    for o in outputs {
        let blob = store.put_blob(&o.bytes)?;
        let preview = match generate_preview(&o.bytes, VendorFormat::Unknown, DERIVED_DATASET_TYPE, Strategy::Sequential)? {
            Some(png) => Some(store.put_blob(&png)?),
            None => None,
        };
        staged.push((o.filename, blob, preview));
    }
    let derivation = Derivation {
        workflow: job.workflow.to_string(),
        key: job.key.clone(),
        inputs: job.inputs.clone(),
    };
    let builders: Vec<DatasetBuilder<'_>> = staged
        .into_iter()
        .map(|(filename, blob, preview)| {
            let entry = job.entry.clone();
            let derivation = derivation.clone();
            Box::new(move |dataset_id, registered_at| DatasetRecord {
                dataset_id,
                owner_entry: entry,
                dataset_type: DERIVED_DATASET_TYPE.to_string(),
                blob,
                original_filename: filename,
                vendor: VendorFormat::Unknown,
                unified_metadata: None,
                raw_metadata: None,
                preview,
                warnings: Vec::new(),
                derivation: Some(derivation),
                registered_at,
            }) as Box<dyn FnOnce(_, _) -> DatasetRecord>
        })
        .collect();
    Ok(repo
        .add_datasets(builders)?
        .iter()
        .map(|d| d.dataset_id.clone())
        .collect())
}

/// Holds the scheduler lock for a journaled repository.
///
/// In-memory repositories have no lock; their callers own the only handle.
pub struct SchedulerLock {
    _file: Option<File>,
}

impl SchedulerLock {
    pub fn acquire(repo: &Repository) -> Result<SchedulerLock> {
        let Some(journal) = repo.journal_path() else {
            return Ok(SchedulerLock { _file: None });
        };
        let path = PathBuf::from(format!("{}.scheduler.lock", journal.display()));
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
        match file.try_lock() {
            Ok(()) => Ok(SchedulerLock { _file: Some(file) }),
            Err(std::fs::TryLockError::WouldBlock) => {
                Err(Error::Busy("another scheduler is running".into()))
            }
            Err(std::fs::TryLockError::Error(e)) => {
                Err(Error::io(format!("locking {}", path.display()), e))
            }
        }
    }
}

fn execute(repo: &Repository, store: &BlobStore, jobs: Vec<Job>, strategy: Strategy) -> Vec<JobOutcome> {
    let computed = par::map(strategy, &jobs, |job| compute(job, store));
    jobs.into_iter()
        .zip(computed)
        .map(|(job, result)| match result.and_then(|out| write(repo, store, &job, out)) {
            Ok(produced) => JobOutcome {
                entry: job.entry.clone(),
                workflow_name: job.workflow.to_string(),
                produced_datasets: produced,
                skipped: false,
                reason: REASON_EXECUTED.to_string(),
            },
            Err(e) => JobOutcome::failed(&job.entry, job.workflow, &e),
        })
        .collect()
}

/// One scheduler pass over every eligible entry.
pub fn scheduler_tick(repo: &Repository, store: &BlobStore) -> Result<Vec<JobOutcome>> {
    scheduler_tick_with(repo, store, Strategy::default())
}

pub fn scheduler_tick_with(repo: &Repository, store: &BlobStore, strategy: Strategy) -> Result<Vec<JobOutcome>> {
    let _lock = SchedulerLock::acquire(repo)?;
    let state = repo.snapshot();
    let mut outcomes = Vec::new();
    let mut jobs = Vec::new();
    for entry in state.objects() {
        let Some(workflow) = workflow_for_type(&entry.type_name) else {
            continue;
        };
        match plan(&state, entry, workflow) {
            Ok(Ok(job)) if up_to_date(&state, &job.entry, workflow, &job.key) => {
                outcomes.push(JobOutcome::skip(&entry.perm_id, workflow, REASON_UP_TO_DATE))
            }
            Ok(Ok(job)) => jobs.push(job),
            Ok(Err(reason)) => outcomes.push(JobOutcome::skip(&entry.perm_id, workflow, reason)),
            Err(e) => outcomes.push(JobOutcome::failed(&entry.perm_id, workflow, &e)),
        }
    }
    outcomes.extend(execute(repo, store, jobs, strategy));
    outcomes.sort_by(|a, b| (&a.entry, &a.workflow_name).cmp(&(&b.entry, &b.workflow_name)));
    Ok(outcomes)
}

/// Runs `workflow` for one entry. With `force`, an up-to-date job runs
/// again; planning errors are returned rather than recorded.
pub fn run_workflow(
    repo: &Repository,
    store: &BlobStore,
    entry: &PermId,
    workflow: &str,
    force: bool,
) -> Result<JobOutcome> {
    let _lock = SchedulerLock::acquire(repo)?;
    let state = repo.snapshot();
    let rec = state.object(entry)?;
    let job = match plan(&state, rec, workflow)? {
        Ok(job) => job,
        Err(reason) => return Ok(JobOutcome::skip(entry, workflow, reason)),
    };
    if !force && up_to_date(&state, entry, job.workflow, &job.key) {
        return Ok(JobOutcome::skip(entry, workflow, REASON_UP_TO_DATE));
    }
    Ok(execute(repo, store, vec![job], Strategy::Sequential).remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Catalog, Properties};
    use crate::store::{register_linked_dataset, Registration};
    use serde_json::json;

    fn props(v: serde_json::Value) -> Properties {
        v.as_object().unwrap().clone().into_iter().collect()
    }

    fn setup() -> (Repository, BlobStore) {
        (Repository::in_memory(Catalog::seeded()), BlobStore::in_memory())
    }

    fn mech_entry(repo: &Repository) -> PermId {
        repo.create_object(MICRO_MECH_TYPE, "CRC", props(json!({"title": "pillars"})), &[])
            .unwrap()
            .perm_id
            .clone()
    }

    fn attach(repo: &Repository, store: &BlobStore, entry: &PermId, ty: &str, name: &str, bytes: &[u8]) {
        register_linked_dataset(repo, store, Registration::new(entry.clone(), bytes, ty, name)).unwrap();
    }

    fn with_two_pillars(repo: &Repository, store: &BlobStore) -> PermId {
        let e = mech_entry(repo);
        let geo = write_geometry_csv(&[("MP1", 1.0, 2.0), ("MP2", 1.2, 2.5)]);
        attach(repo, store, &e, GEOMETRY_DATASET_TYPE, "geometry.csv", geo.as_bytes());
        for (name, k) in [("MP1.csv", 0.02), ("MP2.csv", 0.03)] {
            let csv = write_load_csv(&demo_load_rows(40, k, 1.5));
            attach(repo, store, &e, LOAD_DATASET_TYPE, name, csv.as_bytes());
        }
        e
    }

    #[test]
    fn two_pillars_two_figures_then_idempotent() {
        let (repo, store) = setup();
        let e = with_two_pillars(&repo, &store);
        let first = scheduler_tick(&repo, &store).unwrap();
        assert_eq!(first.len(), 1);
        assert!(first[0].executed(), "{first:?}");
        assert_eq!(first[0].produced_datasets.len(), 2);
        let snap = repo.snapshot();
        let names: Vec<String> = first[0]
            .produced_datasets
            .iter()
            .map(|d| snap.dataset(d).unwrap().original_filename.clone())
            .collect();
        assert_eq!(names, ["MP1_stress_strain.png", "MP2_stress_strain.png"]);
        assert!(first[0]
            .produced_datasets
            .iter()
            .all(|d| snap.dataset(d).unwrap().owner_entry == e));

        let second = scheduler_tick(&repo, &store).unwrap();
        assert!(second.iter().all(|o| o.skipped && o.reason == REASON_UP_TO_DATE));
        assert_eq!(repo.snapshot().datasets().count(), snap.datasets().count());
    }

    #[test]
    fn new_input_retriggers() {
        let (repo, store) = setup();
        let e = with_two_pillars(&repo, &store);
        scheduler_tick(&repo, &store).unwrap();
        let corrected = write_load_csv(&demo_load_rows(41, 0.02, 1.6));
        attach(&repo, &store, &e, LOAD_DATASET_TYPE, "MP1.csv", corrected.as_bytes());
        let out = scheduler_tick(&repo, &store).unwrap();
        assert!(out[0].executed());
    }

    #[test]
    fn geometry_without_loads_is_missing_input() {
        let (repo, store) = setup();
        let e = mech_entry(&repo);
        let geo = write_geometry_csv(&[("MP1", 1.0, 2.0)]);
        attach(&repo, &store, &e, GEOMETRY_DATASET_TYPE, "geometry.csv", geo.as_bytes());
        let out = scheduler_tick(&repo, &store).unwrap();
        assert_eq!(out[0].reason, REASON_MISSING_INPUT);
        assert!(out[0].skipped && out[0].produced_datasets.is_empty());
    }

    #[test]
    fn geometry_from_entry_property() {
        let (repo, store) = setup();
        let geo = write_geometry_csv(&[("MP7", 1.0, 2.0)]);
        let e = repo
            .create_object(MICRO_MECH_TYPE, "CRC", props(json!({"title": "p", "pillar_geometry": geo})), &[])
            .unwrap()
            .perm_id
            .clone();
        let csv = write_load_csv(&demo_load_rows(10, 0.02, 1.5));
        attach(&repo, &store, &e, LOAD_DATASET_TYPE, "MP7.csv", csv.as_bytes());
        assert!(scheduler_tick(&repo, &store).unwrap()[0].executed());
    }

    #[test]
    fn failure_is_recorded_and_does_not_abort() {
        let (repo, store) = setup();
        let bad = mech_entry(&repo);
        attach(&repo, &store, &bad, GEOMETRY_DATASET_TYPE, "g.csv", b"nonsense\n");
        attach(&repo, &store, &bad, LOAD_DATASET_TYPE, "MP1.csv", b"nonsense\n");
        let good = with_two_pillars(&repo, &store);
        let out = scheduler_tick(&repo, &store).unwrap();
        let by_entry = |e: &PermId| out.iter().find(|o| &o.entry == e).unwrap();
        assert!(by_entry(&bad).is_failure());
        assert!(by_entry(&bad).reason.contains("header"), "{}", by_entry(&bad).reason);
        assert!(by_entry(&good).executed());
    }

    #[test]
    fn prep_report_job() {
        let (repo, store) = setup();
        let e = repo
            .create_object(PREP_ENTRY_TYPE, "CRC", props(json!({"title": "polish"})), &[])
            .unwrap()
            .perm_id
            .clone();
        assert_eq!(scheduler_tick(&repo, &store).unwrap()[0].reason, REASON_MISSING_INPUT);
        for (i, abrasive) in [(2, "diamond 3 µm"), (1, "SiC P800")] {
            repo.create_object(
                PREP_STEP_TYPE,
                "CRC",
                props(json!({"sequence_index": i, "protocol_name": "std", "abrasive": abrasive, "duration": 120.0})),
                std::slice::from_ref(&e),
            )
            .unwrap();
        }
        let out = scheduler_tick(&repo, &store).unwrap();
        assert!(out[0].executed());
        assert_eq!(out[0].produced_datasets.len(), 2);
        let snap = repo.snapshot();
        let txt = snap.dataset(&out[0].produced_datasets[1]).unwrap();
        let text = String::from_utf8(store.get_blob(&txt.blob).unwrap()).unwrap();
        let sic = text.find("SiC P800").unwrap();
        assert!(sic < text.find("diamond").unwrap());
        assert!(text.contains("120 s"));
        assert!(scheduler_tick(&repo, &store).unwrap()[0].skipped);
    }

    #[test]
    fn run_workflow_force() {
        let (repo, store) = setup();
        let e = with_two_pillars(&repo, &store);
        assert!(run_workflow(&repo, &store, &e, STRESS_STRAIN, false).unwrap().executed());
        assert!(run_workflow(&repo, &store, &e, STRESS_STRAIN, false).unwrap().skipped);
        assert!(run_workflow(&repo, &store, &e, STRESS_STRAIN, true).unwrap().executed());
        assert_eq!(
            run_workflow(&repo, &store, &e, "nope", false).unwrap_err().code().as_str(),
            "NOTFOUND"
        );
    }

    #[test]
    fn key_ignores_input_order() {
        let e = PermId::parse("20240101000000000-1").unwrap();
        let a = idempotency_key(&e, STRESS_STRAIN, &["b".into(), "a".into()]);
        assert_eq!(a, idempotency_key(&e, STRESS_STRAIN, &["a".into(), "b".into()]));
        assert_ne!(a, idempotency_key(&e, PREP_REPORT, &["a".into(), "b".into()]));
    }
}
