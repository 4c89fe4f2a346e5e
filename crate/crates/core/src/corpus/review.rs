use std::collections::{BTreeMap, HashMap};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{classify, Classifier, CorpusError, LabeledSentence};
use crate::knowledge::Dimension;

pub const BATCH_SIZE: usize = 100;
pub const DEFAULT_MAX_ROUNDS: u32 = 10;
const AUDIT_FRACTION: f64 = 0.03;
const REDRAW_LIMIT: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BatchStatus {
    Open,
    Clean,
    Dirty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewBatch {
    pub batch_no: u32,
    pub round: u32,
    pub items: Vec<LabeledSentence>,
    pub audit_sample: Vec<String>,
    pub verdicts: BTreeMap<String, Verdict>,
    pub status: BatchStatus,
}

impl ReviewBatch {
    /// Clean iff every audited item passed; any failure makes it Dirty.
    pub fn recompute_status(&mut self) {
        let audited = || self.audit_sample.iter().map(|id| self.verdicts.get(id));
        self.status = if audited().any(|v| v == Some(&Verdict::Fail)) {
            BatchStatus::Dirty
        } else if audited().all(|v| v == Some(&Verdict::Pass)) {
            BatchStatus::Clean
        } else {
            BatchStatus::Open
        };
    }

    pub fn audited_items(&self) -> impl Iterator<Item = &LabeledSentence> {
        self.audit_sample
            .iter()
            .filter_map(|id| self.items.iter().find(|i| &i.sentence.id == id))
    }
}

pub fn audit_size(n: usize) -> usize {
    ((AUDIT_FRACTION * n as f64).round() as usize).max(1).min(n)
}

fn draw_audit(items: &[LabeledSentence], seed: u64, batch_no: u32, round: u32, salt: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((u64::from(batch_no) << 32) | u64::from(round));
    rng.set_word_pos(u128::from(salt) << 20);
    let mut idx = sample(&mut rng, items.len(), audit_size(items.len())).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| items[i].sentence.id.clone()).collect()
}

/// Splits into consecutive batches of 100 and draws each audit sample.
pub fn build_review_batches(labeled: &[LabeledSentence], seed: u64) -> Vec<ReviewBatch> {
    labeled
        .chunks(BATCH_SIZE)
        .enumerate()
        .map(|(i, chunk)| {
            let batch_no = i as u32 + 1;
            ReviewBatch {
                batch_no,
                round: 0,
                items: chunk.to_vec(),
                audit_sample: draw_audit(chunk, seed, batch_no, 0, 0),
                verdicts: BTreeMap::new(),
                status: BatchStatus::Open,
            }
        })
        .collect()
}

pub fn record_verdict(
    batches: &mut [ReviewBatch],
    batch_no: u32,
    id: &str,
    verdict: Verdict,
) -> Result<BatchStatus, CorpusError> {
    let batch = batches
        .iter_mut()
        .find(|b| b.batch_no == batch_no)
        .ok_or(CorpusError::UnknownBatch(batch_no))?;
    if !batch.audit_sample.iter().any(|a| a == id) {
        return Err(CorpusError::NotAudited {
            batch_no,
            id: id.to_string(),
        });
    }
    batch.verdicts.insert(id.to_string(), verdict);
    batch.recompute_status();
    Ok(batch.status)
}

/// Source of verdicts for freshly drawn audit samples.
pub trait Auditor {
    /// `None` leaves the item awaiting a human verdict.
    fn verdict(&self, item: &LabeledSentence) -> Option<Verdict>;
}

/// Passes an item iff its labels equal the reference labels.
pub struct GoldAuditor(pub HashMap<String, Vec<Dimension>>);

impl Auditor for GoldAuditor {
    fn verdict(&self, item: &LabeledSentence) -> Option<Verdict> {
        let gold = self.0.get(&item.sentence.id)?;
        let mut expected = gold.clone();
        expected.sort();
        let mut got = item.labels.clone();
        got.sort();
        Some(if expected == got { Verdict::Pass } else { Verdict::Fail })
    }
}

pub struct ConstantAuditor(pub Verdict);

impl Auditor for ConstantAuditor {
    fn verdict(&self, _: &LabeledSentence) -> Option<Verdict> {
        Some(self.0)
    }
}

pub struct PendingAuditor;

impl Auditor for PendingAuditor {
    fn verdict(&self, _: &LabeledSentence) -> Option<Verdict> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepReport {
    pub relabeled: Vec<u32>,
    pub terminated: bool,
}

/// One review round: Dirty batches are relabeled in full and re-audited with
/// a new sample; open audit slots are offered to the auditor.
pub fn review_loop_step(
    batches: &mut [ReviewBatch],
    relabeler: &dyn Classifier,
    auditor: &dyn Auditor,
    seed: u64,
) -> Result<StepReport, CorpusError> {
    let mut relabeled = Vec::new();
    for batch in batches.iter_mut() {
        match batch.status {
            BatchStatus::Clean => continue,
            BatchStatus::Dirty => {
                let before: Vec<Vec<Dimension>> =
                    batch.items.iter().map(|i| i.labels.clone()).collect();
                for item in batch.items.iter_mut() {
                    *item = classify(&item.sentence, relabeler, item.threshold)?;
                }
                let changed = batch
                    .items
                    .iter()
                    .zip(&before)
                    .any(|(i, b)| &i.labels != b);
                batch.round += 1;
                let previous = std::mem::take(&mut batch.audit_sample);
                let mut fresh = draw_audit(&batch.items, seed, batch.batch_no, batch.round, 0);
                if changed && batch.items.len() > fresh.len() {
                    let mut salt = 1;
                    while fresh == previous && salt <= REDRAW_LIMIT {
                        fresh = draw_audit(&batch.items, seed, batch.batch_no, batch.round, salt);
                        salt += 1;
                    }
                }
                batch.audit_sample = fresh;
                batch.verdicts.clear();
                relabeled.push(batch.batch_no);
            }
            BatchStatus::Open => {}
        }
        let pending: Vec<(String, Verdict)> = batch
            .audited_items()
            .filter(|i| !batch.verdicts.contains_key(&i.sentence.id))
            .filter_map(|i| auditor.verdict(i).map(|v| (i.sentence.id.clone(), v)))
            .collect();
        batch.verdicts.extend(pending);
        batch.recompute_status();
    }
    let terminated = batches.iter().all(|b| b.status == BatchStatus::Clean);
    Ok(StepReport {
        relabeled,
        terminated,
    })
}

/// Steps until every batch is Clean, giving up after `max_rounds` steps.
pub fn run_review_loop(
    batches: &mut [ReviewBatch],
    relabeler: &dyn Classifier,
    auditor: &dyn Auditor,
    seed: u64,
    max_rounds: u32,
) -> Result<u32, CorpusError> {
    if batches.iter().all(|b| b.status == BatchStatus::Clean) {
        return Ok(0);
    }
    for round in 1..=max_rounds {
        if review_loop_step(batches, relabeler, auditor, seed)?.terminated {
            return Ok(round);
        }
    }
    Err(CorpusError::MaxRoundsExceeded {
        rounds: max_rounds,
        dirty: batches
            .iter()
            .filter(|b| b.status != BatchStatus::Clean)
            .map(|b| b.batch_no)
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{FixedLabels, LabelSource, Scores, SentenceRecord};

    fn labeled(n: usize, labels: &[Dimension]) -> Vec<LabeledSentence> {
        (0..n)
            .map(|i| LabeledSentence {
                sentence: SentenceRecord::standalone(format!("s{i:05}"), "x"),
                scores: Scores::indicator(labels),
                labels: labels.to_vec(),
                label_source: LabelSource::Lexicon,
                threshold: 0.5,
            })
            .collect()
    }

    #[test]
    fn audit_sizes() {
        assert_eq!(audit_size(100), 3);
        assert_eq!(audit_size(88), 3);
        assert_eq!(audit_size(1), 1);
        assert_eq!(audit_size(16), 1);
        assert_eq!(audit_size(50), 2);
    }

    #[test]
    fn single_sentence_batch() {
        let b = build_review_batches(&labeled(1, &[]), 0);
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].audit_sample.len(), 1);
    }

    #[test]
    fn fail_makes_dirty() {
        let mut b = build_review_batches(&labeled(10, &[]), 0);
        let id = b[0].audit_sample[0].clone();
        assert_eq!(record_verdict(&mut b, 1, &id, Verdict::Fail).unwrap(), BatchStatus::Dirty);
        assert_eq!(
            record_verdict(&mut b, 1, "nope", Verdict::Pass).unwrap_err().code(),
            "NOT_AUDITED"
        );
    }

    #[test]
    fn clean_batches_terminate_without_relabel() {
        let mut b = build_review_batches(&labeled(5, &[]), 0);
        let id = b[0].audit_sample[0].clone();
        record_verdict(&mut b, 1, &id, Verdict::Pass).unwrap();
        let step = review_loop_step(&mut b, &FixedLabels::default(), &PendingAuditor, 0).unwrap();
        assert!(step.terminated);
        assert!(step.relabeled.is_empty());
    }

    #[test]
    fn human_relabel_cleans_batch() {
        let items = labeled(20, &[Dimension::Behavior]);
        let gold: HashMap<String, Vec<Dimension>> = items
            .iter()
            .map(|i| (i.sentence.id.clone(), vec![Dimension::Function]))
            .collect();
        let mut b = build_review_batches(&items, 9);
        let id = b[0].audit_sample[0].clone();
        record_verdict(&mut b, 1, &id, Verdict::Fail).unwrap();
        let human = FixedLabels::human(gold.clone());
        let step = review_loop_step(&mut b, &human, &GoldAuditor(gold), 9).unwrap();
        assert_eq!(step.relabeled, [1]);
        assert!(step.terminated);
        assert_eq!(b[0].status, BatchStatus::Clean);
        assert_ne!(b[0].audit_sample, [id]);
    }

    #[test]
    fn constant_relabeler_hits_guard() {
        let items = labeled(30, &[Dimension::Behavior]);
        let mut b = build_review_batches(&items, 1);
        let id = b[0].audit_sample[0].clone();
        record_verdict(&mut b, 1, &id, Verdict::Fail).unwrap();
        let constant = FixedLabels::default();
        let err =
            run_review_loop(&mut b, &constant, &ConstantAuditor(Verdict::Fail), 1, 5).unwrap_err();
        assert_eq!(err, CorpusError::MaxRoundsExceeded { rounds: 5, dirty: vec![1] });
        assert_eq!(b[0].round, 5);
    }
}
