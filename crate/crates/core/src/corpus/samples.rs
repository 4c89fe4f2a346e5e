use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, LabeledSentence};
use crate::knowledge::Dimension;

/// Rewrites a sentence in a different style while keeping its content.
pub trait Paraphraser: Send + Sync {
    fn paraphrase(&self, text: &str) -> Result<String, CorpusError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedSample {
    pub id: String,
    pub origin_id: String,
    pub paraphrase: String,
    pub labels: Vec<Dimension>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub real: Vec<LabeledSentence>,
    pub augmented: Vec<AugmentedSample>,
    pub target_size: usize,
    pub ratio_real: f64,
    pub seed: u64,
}

impl SampleSet {
    pub fn ids(&self) -> Vec<String> {
        self.real
            .iter()
            .map(|r| r.sentence.id.clone())
            .chain(self.augmented.iter().map(|a| a.id.clone()))
            .collect()
    }
}

const REAL_STREAM: u64 = 1;
const AUGMENT_STREAM: u64 = 2;

/// Draws `round(target * ratio_real)` real samples without replacement and
/// fills the remainder with paraphrases of randomly chosen reviewed sentences.
pub fn generate_samples(
    reviewed: &[LabeledSentence],
    target_size: usize,
    ratio_real: f64,
    seed: u64,
    paraphraser: &dyn Paraphraser,
) -> Result<SampleSet, CorpusError> {
    if !(0.0..=1.0).contains(&ratio_real) {
        return Err(CorpusError::BadRatio(ratio_real));
    }
    let n_real = (target_size as f64 * ratio_real).round() as usize;
    let n_aug = target_size - n_real;
    if reviewed.len() < n_real || (n_aug > 0 && reviewed.is_empty()) {
        return Err(CorpusError::InsufficientCorpus {
            needed: n_real.max(1),
            available: reviewed.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(REAL_STREAM);
    let real = sample(&mut rng, reviewed.len(), n_real)
        .into_iter()
        .map(|i| reviewed[i].clone())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(AUGMENT_STREAM);
    let mut augmented = Vec::with_capacity(n_aug);
    for k in 0..n_aug {
        let origin = &reviewed[rng.gen_range(0..reviewed.len())];
        augmented.push(AugmentedSample {
            id: format!("aug-{:05}", k + 1),
            origin_id: origin.sentence.id.clone(),
            paraphrase: paraphraser.paraphrase(&origin.sentence.text)?,
            labels: origin.labels.clone(),
        });
    }

    Ok(SampleSet {
        real,
        augmented,
        target_size,
        ratio_real,
        seed,
    })
}
