use std::sync::Arc;

use super::{LlmClient, LlmTask, Parsed};
use crate::corpus::{Classifier, CorpusError, LabelSource, Paraphraser, Scores, SentenceRecord};

/// Sentence labels from the Label task; scores are 1.0 for returned labels.
#[derive(Debug, Clone)]
pub struct LlmClassifier(pub Arc<LlmClient>);

impl Classifier for LlmClassifier {
    fn source(&self) -> LabelSource {
        LabelSource::Llm
    }

    fn scores(&self, sentence: &SentenceRecord) -> Result<Scores, CorpusError> {
        match self.0.complete(&LlmTask::label(&sentence.text)) {
            Ok(r) => match r.parsed {
                Parsed::Labels(labels) => Ok(Scores::indicator(&labels)),
                other => Err(CorpusError::ClassifierUnavailable(format!(
                    "unexpected reply {other:?}"
                ))),
            },
            Err(e) => Err(CorpusError::ClassifierUnavailable(e.to_string())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LlmParaphraser(pub Arc<LlmClient>);

impl Paraphraser for LlmParaphraser {
    fn paraphrase(&self, text: &str) -> Result<String, CorpusError> {
        match self.0.complete(&LlmTask::paraphrase(text)) {
            Ok(r) => match r.parsed {
                Parsed::Text(t) => Ok(t),
                other => Err(CorpusError::ParaphraseFailed(format!("unexpected reply {other:?}"))),
            },
            Err(e) => Err(CorpusError::ParaphraseFailed(e.to_string())),
        }
    }
}
