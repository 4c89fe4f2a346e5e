use std::fs::{self, File, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;

use bioinvert_core::knowledge::parse_document;
use serde::Serialize;
use serde_json::Value;

use crate::engine::{Engine, RunContext};
use crate::error::{Result, WorkbenchError};
use crate::project::{Event, EventKind, Project, ProjectSummary, SCHEMA_VERSION};

pub const PROJECT_FILE: &str = "project.json";
pub const EVENTS_FILE: &str = "events.jsonl";
const LOCK_FILE: &str = ".lock";

/// Result of one committed event.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub head: u64,
    pub event: String,
    pub report: Value,
}

/// Everything in a project, as served by `export`.
#[derive(Debug, Serialize)]
pub struct Bundle<'a> {
    pub fbce_version: u32,
    pub project: &'a Project,
    pub events: &'a [Event],
}

/// Snapshot plus append-only event log in one directory.
#[derive(Debug, Clone)]
pub struct ProjectDir {
    path: PathBuf,
}

impl ProjectDir {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        ProjectDir { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn exists(&self) -> bool {
        self.path.join(PROJECT_FILE).is_file()
    }

    /// Starts a project in `path`, which must not hold one already.
    pub fn create(path: impl Into<PathBuf>, id: &str, name: &str, engine: &Engine) -> Result<(ProjectDir, Outcome)> {
        let dir = ProjectDir::new(path);
        if dir.exists() {
            return Err(WorkbenchError::ProjectExists(id.to_string()));
        }
        fs::create_dir_all(&dir.path)?;
        let outcome = dir.execute(
            engine,
            EventKind::ProjectCreated {
                id: id.to_string(),
                name: name.to_string(),
            },
            None,
            None,
        )?;
        Ok((dir, outcome))
    }

    /// The last committed snapshot. Snapshots are replaced atomically, so
    /// readers need no lock.
    pub fn load(&self) -> Result<Project> {
        self.snapshot()?
            .ok_or_else(|| WorkbenchError::ProjectNotFound(self.path.display().to_string()))
    }

    /// The snapshot, or the replayed log when the log is ahead of it (a
    /// write interrupted between log and snapshot).
    pub fn load_or_replay(&self, engine: &Engine) -> Result<Project> {
        let project = self.load()?;
        let events = self.events()?;
        if events.last().map_or(0, |e| e.seq) == project.head {
            return Ok(project);
        }
        tracing::warn!(dir = %self.path.display(), "snapshot out of step with event log, replaying");
        replay(engine, &events)
    }

    fn snapshot(&self) -> Result<Option<Project>> {
        let text = match fs::read_to_string(self.path.join(PROJECT_FILE)) {
            Ok(t) => t,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        check_version(&text, PROJECT_FILE)?;
        Ok(Some(parse_document(&text)?))
    }

    pub fn events(&self) -> Result<Vec<Event>> {
        let text = match fs::read_to_string(self.path.join(EVENTS_FILE)) {
            Ok(t) => t,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                parse_document::<Event>(l).map_err(|e| WorkbenchError::Schema {
                    path: format!("/{EVENTS_FILE}/{}{}", i, e.path.trim_end_matches('/')),
                    message: e.message,
                })
            })
            .collect()
    }

    /// Applies `kind` under the project lock and commits it: event first,
    /// then the snapshot. Nothing is written when the event fails or is
    /// cancelled.
    pub fn execute(
        &self,
        engine: &Engine,
        mut kind: EventKind,
        expected_head: Option<u64>,
        cancel: Option<&AtomicBool>,
    ) -> Result<Outcome> {
        let _lock = Lock::acquire(&self.path)?;
        let mut project = match kind {
            EventKind::ProjectCreated { .. } if !self.exists() => Project::empty("", ""),
            EventKind::ProjectCreated { ref id, .. } => return Err(WorkbenchError::ProjectExists(id.clone())),
            _ => self.load_or_replay(engine)?,
        };
        if let Some(expected) = expected_head {
            if expected != project.head {
                return Err(WorkbenchError::Conflict {
                    expected,
                    actual: project.head,
                });
            }
        }
        engine.resolve(&project, &mut kind);
        let ctx = RunContext {
            dir: Some(&self.path),
            cancel,
        };
        let report = engine.apply(&mut project, &kind, &ctx)?;
        if let Some(c) = cancel {
            if c.load(std::sync::atomic::Ordering::SeqCst) {
                return Err(WorkbenchError::Cancelled);
            }
        }
        let event = Event {
            seq: project.head,
            kind,
        };
        let mut line = serde_json::to_string(&event).expect("events serialize");
        line.push('\n');
        let mut log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.path.join(EVENTS_FILE))?;
        log.write_all(line.as_bytes())?;
        log.sync_data()?;
        write_atomic(&self.path.join(PROJECT_FILE), &snapshot_text(&project))?;
        Ok(Outcome {
            head: project.head,
            event: event.kind.name().to_string(),
            report,
        })
    }

    /// Pretty JSON of the project and its full event log.
    pub fn export(&self) -> Result<String> {
        let project = self.load()?;
        let events = self.events()?;
        Ok(export_text(&project, &events))
    }
}

pub fn export_text(project: &Project, events: &[Event]) -> String {
    let bundle = Bundle {
        fbce_version: SCHEMA_VERSION,
        project,
        events,
    };
    let mut text = serde_json::to_string_pretty(&bundle).expect("bundle serializes");
    text.push('\n');
    text
}

pub fn snapshot_text(project: &Project) -> String {
    let mut text = serde_json::to_string_pretty(project).expect("project serializes");
    text.push('\n');
    text
}

/// Folds `events` over an empty project.
pub fn replay(engine: &Engine, events: &[Event]) -> Result<Project> {
    let mut project = Project::empty("", "");
    for e in events {
        if e.seq != project.head + 1 {
            return Err(WorkbenchError::schema(
                format!("/{EVENTS_FILE}/{}/seq", project.head),
                format!("expected seq {}, found {}", project.head + 1, e.seq),
            ));
        }
        engine.apply(&mut project, &e.kind, &RunContext::default())?;
    }
    Ok(project)
}

fn check_version(text: &str, file: &str) -> Result<()> {
    #[derive(serde::Deserialize)]
    struct Versioned {
        fbce_version: Option<Value>,
    }
    let v: Versioned = serde_json::from_str(text)
        .map_err(|e| WorkbenchError::schema(format!("/{file}"), e.to_string()))?;
    match v.fbce_version {
        Some(Value::Number(n)) if n.as_u64() == Some(u64::from(SCHEMA_VERSION)) => Ok(()),
        Some(other) => Err(WorkbenchError::VersionMismatch(format!(
            "{file} has fbce_version {other}, this build reads {SCHEMA_VERSION}"
        ))),
        None => Err(WorkbenchError::VersionMismatch(format!("{file} has no fbce_version key"))),
    }
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Advisory single-writer lock; removed on drop.
struct Lock {
    path: PathBuf,
}

impl Lock {
    fn acquire(dir: &Path) -> Result<Lock> {
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                write!(f, "{}", std::process::id())?;
                Ok(Lock { path })
            }
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                let holder = fs::read_to_string(&path).unwrap_or_default();
                Err(WorkbenchError::Locked(format!(
                    "{} (held by pid {}; delete {} if that process is gone)",
                    dir.display(),
                    holder.trim(),
                    path.display()
                )))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// A directory of projects, one subdirectory each.
pub struct Workbench {
    root: PathBuf,
    engine: Engine,
}

impl Workbench {
    pub fn new(root: impl Into<PathBuf>, engine: Engine) -> Self {
        Workbench {
            root: root.into(),
            engine,
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn dir(&self, id: &str) -> Result<ProjectDir> {
        check_id(id)?;
        Ok(ProjectDir::new(self.root.join(id)))
    }

    /// An existing project.
    pub fn open(&self, id: &str) -> Result<ProjectDir> {
        let dir = self.dir(id)?;
        if !dir.exists() {
            return Err(WorkbenchError::ProjectNotFound(id.to_string()));
        }
        Ok(dir)
    }

    pub fn list(&self) -> Result<Vec<ProjectSummary>> {
        let entries = match fs::read_dir(&self.root) {
            Ok(e) => e,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut names: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| check_id(n).is_ok())
            .collect();
        names.sort();
        names
            .iter()
            .map(|n| ProjectDir::new(self.root.join(n)))
            .filter(ProjectDir::exists)
            .map(|d| d.load().map(|p| p.summary()))
            .collect()
    }

    pub fn create(&self, id: &str, name: &str) -> Result<Outcome> {
        let dir = self.dir(id)?;
        ProjectDir::create(dir.path, id, name, &self.engine).map(|(_, o)| o)
    }

    pub fn load(&self, id: &str) -> Result<Project> {
        self.open(id)?.load_or_replay(&self.engine)
    }

    pub fn execute(
        &self,
        id: &str,
        kind: EventKind,
        expected_head: Option<u64>,
        cancel: Option<&AtomicBool>,
    ) -> Result<Outcome> {
        self.open(id)?.execute(&self.engine, kind, expected_head, cancel)
    }

    pub fn delete(&self, id: &str) -> Result<()> {
        let dir = self.open(id)?;
        let lock = Lock::acquire(dir.path())?;
        std::mem::forget(lock);
        fs::remove_dir_all(dir.path())?;
        Ok(())
    }
}

fn check_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id.len() <= 64
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(WorkbenchError::BadProjectId(id.to_string()))
    }
}
