//! JSON document form of strategy frames (`fbce_version: 1`).

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_path_to_error::Segment;
use thiserror::Error;

use super::{Behavior, Characteristic, EnvironmentDesc, FrameId, FunctionExpr, Provenance, StrategyFrame};

pub const FBCE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SchemaErrorKind {
    Malformed,
    VersionMismatch,
    DuplicateId,
}

/// `SCHEMA_ERROR` with a JSON-pointer path into the offending document.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("SCHEMA_ERROR at {path}: {message}")]
pub struct SchemaError {
    pub kind: SchemaErrorKind,
    pub path: String,
    pub message: String,
}

impl SchemaError {
    pub fn code(&self) -> &'static str {
        match self.kind {
            SchemaErrorKind::VersionMismatch => "VERSION_MISMATCH",
            _ => "SCHEMA_ERROR",
        }
    }

    fn new(kind: SchemaErrorKind, path: impl Into<String>, message: impl Into<String>) -> Self {
        SchemaError {
            kind,
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Serialize)]
struct FrameDocOut<'a> {
    fbce_version: u32,
    #[serde(flatten)]
    frame: &'a StrategyFrame,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameDocIn {
    fbce_version: u32,
    id: FrameId,
    behavior: Behavior,
    functions: Vec<FunctionExpr>,
    characteristics: Vec<Characteristic>,
    #[serde(default)]
    environment: Option<EnvironmentDesc>,
    provenance: Provenance,
}

impl FrameDocIn {
    fn into_frame(self, base: &str) -> Result<StrategyFrame, SchemaError> {
        if self.fbce_version != FBCE_VERSION {
            return Err(SchemaError::new(
                SchemaErrorKind::VersionMismatch,
                format!("{base}/fbce_version"),
                format!(
                    "unsupported fbce_version {} (expected {FBCE_VERSION})",
                    self.fbce_version
                ),
            ));
        }
        Ok(StrategyFrame {
            id: self.id,
            behavior: self.behavior,
            functions: self.functions,
            characteristics: self.characteristics,
            environment: self.environment,
            provenance: self.provenance,
        })
    }
}

#[derive(Serialize)]
struct FrameSetOut<'a> {
    fbce_version: u32,
    frames: Vec<FrameDocOut<'a>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameSetIn {
    fbce_version: u32,
    frames: Vec<FrameDocIn>,
}

pub fn serialize_frame(frame: &StrategyFrame) -> String {
    serde_json::to_string_pretty(&FrameDocOut {
        fbce_version: FBCE_VERSION,
        frame,
    })
    .expect("frames always serialize")
}

pub fn parse_frame(doc: &str) -> Result<StrategyFrame, SchemaError> {
    let parsed: FrameDocIn = parse_document(doc)?;
    parsed.into_frame("")
}

/// A project import document: `{"fbce_version": 1, "frames": [...]}` with unique ids.
pub fn serialize_frame_set(frames: &[StrategyFrame]) -> String {
    serde_json::to_string_pretty(&FrameSetOut {
        fbce_version: FBCE_VERSION,
        frames: frames
            .iter()
            .map(|frame| FrameDocOut {
                fbce_version: FBCE_VERSION,
                frame,
            })
            .collect(),
    })
    .expect("frames always serialize")
}

pub fn parse_frame_set(doc: &str) -> Result<Vec<StrategyFrame>, SchemaError> {
    let parsed: FrameSetIn = parse_document(doc)?;
    if parsed.fbce_version != FBCE_VERSION {
        return Err(SchemaError::new(
            SchemaErrorKind::VersionMismatch,
            "/fbce_version",
            format!("unsupported fbce_version {}", parsed.fbce_version),
        ));
    }
    let mut ids = HashSet::new();
    let mut frames = Vec::with_capacity(parsed.frames.len());
    for (i, doc) in parsed.frames.into_iter().enumerate() {
        let frame = doc.into_frame(&format!("/frames/{i}"))?;
        if !ids.insert(frame.id.clone()) {
            return Err(SchemaError::new(
                SchemaErrorKind::DuplicateId,
                format!("/frames/{i}/id"),
                format!("duplicate-id: frame id {:?} appears more than once", frame.id.0),
            ));
        }
        frames.push(frame);
    }
    Ok(frames)
}

/// Deserializes any JSON document, reporting failures as `SCHEMA_ERROR` at a JSON pointer.
pub fn parse_document<T: for<'de> Deserialize<'de>>(doc: &str) -> Result<T, SchemaError> {
    let de = &mut serde_json::Deserializer::from_str(doc);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let mut path = String::new();
        for seg in err.path().iter() {
            match seg {
                Segment::Seq { index } => path.push_str(&format!("/{index}")),
                Segment::Map { key } => path.push_str(&format!("/{key}")),
                Segment::Enum { variant } => path.push_str(&format!("/{variant}")),
                Segment::Unknown => path.push_str("/?"),
            }
        }
        let message = err.inner().to_string();
        if let Some(field) = backticked(&message, "missing field `")
            .or_else(|| backticked(&message, "unknown field `"))
        {
            if !path.ends_with(&format!("/{field}")) {
                path.push('/');
                path.push_str(&field);
            }
        }
        if path.is_empty() {
            path.push('/');
        }
        SchemaError::new(SchemaErrorKind::Malformed, path, message)
    })
}

fn backticked(message: &str, prefix: &str) -> Option<String> {
    let rest = message.strip_prefix(prefix)?;
    rest.split('`').next().map(str::to_string)
}
