//! Project persistence, stage orchestration and the HTTP API of the
//! strategy-inversion workbench.

pub mod api;
pub mod config;
pub mod engine;
pub mod error;
pub mod jobs;
pub mod project;
pub mod store;

pub use config::Config;
pub use engine::{Engine, RunContext};
pub use error::{Result, WorkbenchError};
pub use project::{Event, EventKind, Project, Stage, StageParams, StageState};
pub use store::{replay, Outcome, ProjectDir, Workbench};
