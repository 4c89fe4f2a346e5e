use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::error::WorkbenchError;
use crate::project::Stage;
use crate::store::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Running,
    Done,
    Failed,
    Cancelled,
}

#[derive(Debug, Clone, Serialize)]
pub struct JobError {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct JobStatus {
    pub id: String,
    pub project: String,
    pub stage: Stage,
    pub state: JobState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<JobError>,
}

struct Job {
    status: JobStatus,
    cancel: Arc<AtomicBool>,
}

/// Background stage runs, polled by id.
#[derive(Default)]
pub struct Jobs {
    next: AtomicU64,
    jobs: Mutex<BTreeMap<String, Job>>,
}

impl Jobs {
    /// Registers a running job and returns its id and cancel flag.
    pub fn start(&self, project: &str, stage: Stage) -> (String, Arc<AtomicBool>) {
        let id = format!("job-{}", self.next.fetch_add(1, Ordering::SeqCst) + 1);
        let cancel = Arc::new(AtomicBool::new(false));
        let status = JobStatus {
            id: id.clone(),
            project: project.to_string(),
            stage,
            state: JobState::Running,
            outcome: None,
            error: None,
        };
        self.jobs.lock().expect("jobs lock").insert(
            id.clone(),
            Job {
                status,
                cancel: cancel.clone(),
            },
        );
        (id, cancel)
    }

    pub fn finish(&self, id: &str, result: Result<Outcome, WorkbenchError>) {
        let mut jobs = self.jobs.lock().expect("jobs lock");
        let Some(job) = jobs.get_mut(id) else { return };
        match result {
            Ok(o) => {
                job.status.state = JobState::Done;
                job.status.outcome = Some(o);
            }
            Err(WorkbenchError::Cancelled) => job.status.state = JobState::Cancelled,
            Err(e) => {
                job.status.state = JobState::Failed;
                job.status.error = Some(JobError {
                    code: e.code().to_string(),
                    message: e.to_string(),
                });
            }
        }
    }

    pub fn status(&self, id: &str) -> Option<JobStatus> {
        self.jobs.lock().expect("jobs lock").get(id).map(|j| j.status.clone())
    }

    /// Asks a running job to stop. It commits nothing once the flag is seen.
    pub fn cancel(&self, id: &str) -> Option<JobStatus> {
        let jobs = self.jobs.lock().expect("jobs lock");
        let job = jobs.get(id)?;
        if job.status.state == JobState::Running {
            job.cancel.store(true, Ordering::SeqCst);
        }
        Some(job.status.clone())
    }
}
