use bioinvert_core::corpus::CorpusError;
use bioinvert_core::decision::DecisionError;
use bioinvert_core::inversion::InversionError;
use bioinvert_core::knowledge::{SchemaError, SchemaErrorKind, ValidationReport};
use bioinvert_core::llm::LlmError;
use thiserror::Error;

use crate::project::Stage;

#[derive(Debug, Error)]
pub enum WorkbenchError {
    #[error("IO_ERROR: {0}")]
    Io(String),
    #[error("VERSION_MISMATCH: {0}")]
    VersionMismatch(String),
    #[error("SCHEMA_ERROR at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("STAGE_ORDER_VIOLATION: {stage} needs {requires} to be complete")]
    StageOrder { stage: Stage, requires: Stage },
    #[error("PROJECT_NOT_FOUND: {0}")]
    ProjectNotFound(String),
    #[error("PROJECT_EXISTS: {0}")]
    ProjectExists(String),
    #[error("BAD_PROJECT_ID: {0:?}")]
    BadProjectId(String),
    #[error("LOCKED: project {0} is being written by another process")]
    Locked(String),
    #[error("CONFLICT: head is {actual}, request was based on {expected}")]
    Conflict { expected: u64, actual: u64 },
    #[error("NOT_FOUND: {0}")]
    NotFound(String),
    #[error("MISSING_INPUT: {0}")]
    MissingInput(String),
    #[error("VALIDATION_FAILED: {} violation(s)", .0.violations.len())]
    Validation(ValidationReport),
    #[error("BAD_REQUEST: {0}")]
    BadRequest(String),
    #[error("CANCELLED: the job was cancelled before it committed")]
    Cancelled,
    #[error("BIND_ERROR: {0}")]
    Bind(String),
    #[error("{stage}: {source}")]
    Corpus {
        stage: Stage,
        #[source]
        source: CorpusError,
    },
    #[error("{stage}: {source}")]
    Inversion {
        stage: Stage,
        #[source]
        source: InversionError,
    },
    #[error("{stage}: {source}")]
    Decision {
        stage: Stage,
        #[source]
        source: DecisionError,
    },
    #[error("{0}")]
    Llm(LlmError),
}

impl WorkbenchError {
    pub fn code(&self) -> &'static str {
        match self {
            WorkbenchError::Io(_) => "IO_ERROR",
            WorkbenchError::VersionMismatch(_) => "VERSION_MISMATCH",
            WorkbenchError::Schema { .. } => "SCHEMA_ERROR",
            WorkbenchError::StageOrder { .. } => "STAGE_ORDER_VIOLATION",
            WorkbenchError::ProjectNotFound(_) => "PROJECT_NOT_FOUND",
            WorkbenchError::ProjectExists(_) => "PROJECT_EXISTS",
            WorkbenchError::BadProjectId(_) => "BAD_PROJECT_ID",
            WorkbenchError::Locked(_) => "LOCKED",
            WorkbenchError::Conflict { .. } => "CONFLICT",
            WorkbenchError::NotFound(_) => "NOT_FOUND",
            WorkbenchError::MissingInput(_) => "MISSING_INPUT",
            WorkbenchError::Validation(_) => "VALIDATION_FAILED",
            WorkbenchError::BadRequest(_) => "BAD_REQUEST",
            WorkbenchError::Cancelled => "CANCELLED",
            WorkbenchError::Bind(_) => "BIND_ERROR",
            WorkbenchError::Corpus { source, .. } => source.code(),
            WorkbenchError::Inversion { source, .. } => source.code(),
            WorkbenchError::Decision { source, .. } => source.code(),
            WorkbenchError::Llm(e) => e.code(),
        }
    }

    /// JSON pointer of the offending field, when there is one.
    pub fn pointer(&self) -> Option<String> {
        match self {
            WorkbenchError::Schema { path, .. } => Some(path.clone()),
            WorkbenchError::Validation(r) => r.violations.first().map(|v| v.path.clone()),
            _ => None,
        }
    }
}

impl From<std::io::Error> for WorkbenchError {
    fn from(e: std::io::Error) -> Self {
        WorkbenchError::Io(e.to_string())
    }
}

impl From<SchemaError> for WorkbenchError {
    fn from(e: SchemaError) -> Self {
        match e.kind {
            SchemaErrorKind::VersionMismatch => WorkbenchError::VersionMismatch(e.message),
            _ => WorkbenchError::Schema {
                path: e.path,
                message: e.message,
            },
        }
    }
}

impl WorkbenchError {
    /// A serde failure at a JSON pointer.
    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        WorkbenchError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = WorkbenchError> = std::result::Result<T, E>;
