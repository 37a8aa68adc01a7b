//! Status tracking for workflow runs executed off the request path.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use rdm_core::workflows::JobOutcome;

use crate::error::ErrorBody;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub job_id: u64,
    pub kind: String,
    pub state: JobState,
    #[serde(default)]
    pub outcomes: Vec<JobOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

#[derive(Debug, Default)]
pub struct JobRegistry {
    next: AtomicU64,
    jobs: Mutex<BTreeMap<u64, JobStatus>>,
}

impl JobRegistry {
    pub fn start(&self, kind: &str) -> u64 {
        let id = self.next.fetch_add(1, Ordering::Relaxed) + 1;
        self.jobs.lock().unwrap().insert(
            id,
            JobStatus {
                job_id: id,
                kind: kind.to_string(),
                state: JobState::Running,
                outcomes: Vec::new(),
                error: None,
            },
        );
        id
    }

    pub fn finish(&self, id: u64, result: Result<Vec<JobOutcome>, ErrorBody>) {
        if let Some(job) = self.jobs.lock().unwrap().get_mut(&id) {
            match result {
                Ok(outcomes) => {
                    job.state = JobState::Done;
                    job.outcomes = outcomes;
                }
                Err(e) => {
                    job.state = JobState::Failed;
                    job.error = Some(e);
                }
            }
        }
    }

    pub fn get(&self, id: u64) -> Option<JobStatus> {
        self.jobs.lock().unwrap().get(&id).cloned()
    }
}
