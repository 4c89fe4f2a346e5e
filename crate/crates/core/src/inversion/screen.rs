use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{InversionError, InversionResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum ScreenVerdict {
    Keep,
    Drop { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Screening {
    pub kept: Vec<InversionResult>,
    pub dropped: Vec<InversionResult>,
}

/// Splits results by designer verdict. Drop reasons are appended to the
/// dropped frame's provenance notes.
pub fn screen(
    results: &[InversionResult],
    verdicts: &BTreeMap<String, ScreenVerdict>,
) -> Result<Screening, InversionError> {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for r in results {
        match verdicts.get(r.id().as_str()) {
            None => return Err(InversionError::MissingVerdict(r.id().clone())),
            Some(ScreenVerdict::Keep) => kept.push(r.clone()),
            Some(ScreenVerdict::Drop { reason }) => {
                let mut r = r.clone();
                let notes = &mut r.engineering_frame.provenance.notes;
                if !notes.is_empty() {
                    notes.push('\n');
                }
                notes.push_str(&format!("dropped in screening: {reason}"));
                dropped.push(r);
            }
        }
    }
    Ok(Screening { kept, dropped })
}
