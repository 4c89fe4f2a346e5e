//! Strategy inversion: frames from labeled sentences, biological-to-engineering
//! noun substitution, logical correction and designer screening.

mod build;
mod kb;
mod screen;
mod substitute;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::{Dimension, FrameId, StrategyFrame};
use crate::llm::{correct_frame, Change, LlmClient, LlmError};

pub use crate::verbs::{gerundize, GerundError};
pub use build::{build_frame, LlmSummarizer, RuleSummarizer, Summarizer};
pub use kb::{CompatibilityRule, EngineeringKB, RuleVerdict, TermMapping};
pub use screen::{screen, ScreenVerdict, Screening};
pub use substitute::{
    apply_substitutions, find_terms, replace_terms, substitute, unresolved_terms, Replaced,
    Substitution, TermHit, Unresolved,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InversionError {
    #[error("KB_EMPTY: the knowledge base has no mappings")]
    KbEmpty,
    #[error("KB_INVALID: {0}")]
    KbInvalid(String),
    #[error("MISSING_DIMENSION: no {0:?} content")]
    MissingDimension(Vec<Dimension>),
    #[error("INVALID_FRAME: {0}")]
    InvalidFrame(String),
    #[error("MISSING_VERDICT: no verdict for {0}")]
    MissingVerdict(FrameId),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("correction failed ({error}); substitution result kept")]
    Partial {
        error: LlmError,
        partial: Box<InversionResult>,
    },
}

impl InversionError {
    pub fn code(&self) -> &'static str {
        match self {
            InversionError::KbEmpty => "KB_EMPTY",
            InversionError::KbInvalid(_) => "KB_INVALID",
            InversionError::MissingDimension(_) => "MISSING_DIMENSION",
            InversionError::InvalidFrame(_) => "INVALID_FRAME",
            InversionError::MissingVerdict(_) => "MISSING_VERDICT",
            InversionError::Llm(e) | InversionError::Partial { error: e, .. } => e.code(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionResult {
    pub engineering_frame: StrategyFrame,
    pub source_frame: StrategyFrame,
    pub substitutions: Vec<Substitution>,
    pub corrections: Vec<Change>,
    pub unresolved: Vec<Unresolved>,
    #[serde(default)]
    pub waived_unresolved: bool,
}

impl InversionResult {
    pub fn id(&self) -> &FrameId {
        &self.engineering_frame.id
    }

    /// Ready for ranking once every unresolved term is fixed or waived.
    pub fn engineering_ready(&self) -> bool {
        self.unresolved.is_empty() || self.waived_unresolved
    }
}

/// Maps a biological frame onto engineering vocabulary: KB substitution,
/// then correction through `corrector`. The engineering frame keeps the
/// source id.
pub fn invert(
    frame: &StrategyFrame,
    kb: &EngineeringKB,
    corrector: &LlmClient,
) -> Result<InversionResult, InversionError> {
    if kb.is_empty() {
        return Err(InversionError::KbEmpty);
    }
    let report = crate::knowledge::validate_frame(frame);
    if let Some(v) = report.violations.first() {
        return Err(InversionError::InvalidFrame(format!("{:?} at {}", v.code, v.path)));
    }
    let (substituted, substitutions) = substitute(frame, kb);
    let mut result = InversionResult {
        unresolved: unresolved_terms(&substituted, kb),
        engineering_frame: substituted,
        source_frame: frame.clone(),
        substitutions,
        corrections: Vec::new(),
        waived_unresolved: false,
    };
    match correct_frame(&result.engineering_frame, kb, corrector) {
        Ok(corrected) => {
            result.engineering_frame = corrected.frame;
            result.corrections = corrected.changes;
            result.unresolved = unresolved_terms(&result.engineering_frame, kb);
            Ok(result)
        }
        Err(error) => Err(InversionError::Partial {
            error,
            partial: Box::new(result),
        }),
    }
}
