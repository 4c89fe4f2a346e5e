use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::{LlmClient, LlmError, LlmTask, Parsed};
use crate::inversion::{CompatibilityRule, EngineeringKB, TermMapping};
use crate::knowledge::{StrategyFrame, TextUnit};
use crate::text::{phrase_key, words};

/// One logged slot edit proposed by the corrector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Change {
    pub path: String,
    pub before: String,
    pub after: String,
    pub justification: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectedFrame {
    pub frame: StrategyFrame,
    pub changes: Vec<Change>,
}

/// The JSON payload of a correction task.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct CorrectionPayload {
    pub units: Vec<TextUnit>,
    pub mappings: Vec<TermMapping>,
    pub vocabulary: Vec<String>,
    pub rules: Vec<CompatibilityRule>,
}

/// Tokens a correction may use: the KB vocabulary plus the frame's own words.
fn allowed_tokens(frame: &StrategyFrame, kb: &EngineeringKB) -> BTreeSet<String> {
    kb.vocabulary
        .iter()
        .map(String::as_str)
        .chain(frame.text_units().iter().map(|u| u.text.as_str()).collect::<Vec<_>>())
        .flat_map(words)
        .collect()
}

fn check_changes(
    changes: &[Change],
    units: &[TextUnit],
    allowed: &BTreeSet<String>,
) -> Result<(), String> {
    let mut paths = HashSet::new();
    for c in changes {
        let unit = units
            .iter()
            .find(|u| u.path == c.path)
            .ok_or_else(|| format!("unknown slot path {:?}", c.path))?;
        if phrase_key(&unit.text) != phrase_key(&c.before) {
            return Err(format!("{}: before {:?} does not match {:?}", c.path, c.before, unit.text));
        }
        if c.after.trim().is_empty() {
            return Err(format!("{}: empty replacement", c.path));
        }
        if !paths.insert(c.path.as_str()) {
            return Err(format!("{}: changed twice", c.path));
        }
        if let Some(stray) = words(&c.after).into_iter().find(|w| !allowed.contains(w)) {
            return Err(format!("{}: {stray:?} is outside the vocabulary", c.path));
        }
    }
    Ok(())
}

/// Asks the backend to repair slot phrases against the KB and applies every
/// proposed change, keeping a log for review and revert.
pub fn correct_frame(
    frame: &StrategyFrame,
    kb: &EngineeringKB,
    client: &LlmClient,
) -> Result<CorrectedFrame, LlmError> {
    if kb.is_empty() {
        return Err(LlmError::KbEmpty);
    }
    let units = frame.text_units();
    let payload = CorrectionPayload {
        units: units.clone(),
        mappings: kb.mappings.clone(),
        vocabulary: kb.vocabulary.clone(),
        rules: kb.rules.clone(),
    };
    let task = LlmTask::correct(serde_json::to_string(&payload).expect("payload serializes"));
    let allowed = allowed_tokens(frame, kb);
    let check = |p: &Parsed| match p {
        Parsed::Changes(changes) => check_changes(changes, &units, &allowed),
        _ => Err("expected a change list".to_string()),
    };
    let response = client.complete_checked(&task, &client.policy, &check)?;
    let Parsed::Changes(proposed) = response.parsed else {
        unreachable!("checked above")
    };

    let mut out = frame.clone();
    let mut changes = Vec::new();
    for c in proposed {
        if phrase_key(&c.before) == phrase_key(&c.after) {
            continue;
        }
        out.set_text_unit(&c.path, &c.after);
        changes.push(c);
    }
    Ok(CorrectedFrame { frame: out, changes })
}

/// Undoes one logged change; the slot must still hold the changed text.
pub fn revert_change(frame: &mut StrategyFrame, change: &Change) -> Result<(), LlmError> {
    let current = frame.text_unit(&change.path).unwrap_or_default();
    if phrase_key(&current) != phrase_key(&change.after) {
        return Err(LlmError::RevertConflict {
            path: change.path.clone(),
            expected: change.after.clone(),
        });
    }
    frame.set_text_unit(&change.path, &change.before);
    Ok(())
}
