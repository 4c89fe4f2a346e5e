use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use bioinvert_core::corpus::{
    build_review_batches, classify, generate_samples, record_verdict, review_loop_step,
    run_review_loop, segment, BatchStatus, Classifier, ConstantAuditor, CorpusError, LabelSource,
    LexiconClassifier, PendingAuditor, Scores, SentenceRecord, Verdict,
};
use bioinvert_core::decision::{cluster_top, g1_weights, rank_strategies, CriteriaSet};
use bioinvert_core::inversion::{
    build_frame, invert, screen, InversionError, LlmSummarizer, RuleSummarizer, Summarizer,
};
use bioinvert_core::knowledge::{validate_frame, Dimension};
use bioinvert_core::llm::{HttpBackend, LlmClassifier, LlmClient, LlmParaphraser, MockBackend};
use serde_json::{json, Value};

use crate::config::Config;
use crate::error::{Result, WorkbenchError};
use crate::project::{
    AuditorKind, BackendKind, EventKind, Project, SampleParams, Stage, StageParams, StageState,
    Stamped,
};

/// Trace file written under the project directory when tracing is on.
pub const TRACE_FILE: &str = "llm-trace.jsonl";

/// Where an event is applied and how to stop it early.
#[derive(Clone, Copy, Default)]
pub struct RunContext<'a> {
    pub dir: Option<&'a Path>,
    pub cancel: Option<&'a AtomicBool>,
}

impl RunContext<'_> {
    fn checkpoint(&self) -> Result<()> {
        match self.cancel {
            Some(c) if c.load(Ordering::SeqCst) => Err(WorkbenchError::Cancelled),
            _ => Ok(()),
        }
    }
}

/// Applies events to projects. Holds the configured backends.
pub struct Engine {
    config: Config,
    trace_llm: bool,
    mock: Arc<LlmClient>,
}

impl Engine {
    pub fn new(config: Config) -> Self {
        Engine {
            config,
            trace_llm: false,
            mock: Arc::new(LlmClient::new(MockBackend::bundled())),
        }
    }

    pub fn with_trace(mut self, on: bool) -> Self {
        self.trace_llm = on;
        self
    }

    pub fn with_mock(mut self, mock: MockBackend) -> Self {
        self.mock = Arc::new(LlmClient::new(mock));
        self
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    /// LLM client for `backend`. The lexicon backend has no model of its own
    /// and uses the mock for the steps that need one (correction, paraphrase).
    fn client(&self, backend: BackendKind, ctx: &RunContext) -> Result<Arc<LlmClient>> {
        match backend {
            BackendKind::Lexicon | BackendKind::Mock => Ok(self.mock.clone()),
            BackendKind::Llm => {
                let cfg = self.config.llm.clone().ok_or_else(|| {
                    WorkbenchError::MissingInput("the llm backend needs an [llm] section in bioinvert.toml".into())
                })?;
                let mut http = HttpBackend::new(cfg).map_err(WorkbenchError::Llm)?;
                if let (true, Some(dir)) = (self.trace_llm, ctx.dir) {
                    http = http.with_trace(dir.join(TRACE_FILE));
                }
                Ok(Arc::new(LlmClient::new(http)))
            }
        }
    }

    fn labeler(&self, backend: BackendKind, ctx: &RunContext) -> Result<Labeler> {
        Ok(match backend {
            BackendKind::Lexicon => Labeler::Lexicon(LexiconClassifier::shared()),
            _ => Labeler::Llm(LlmClassifier(self.client(backend, ctx)?)),
        })
    }

    /// Fills unset parameters from the config so the recorded event replays
    /// without it.
    pub fn resolve(&self, project: &Project, kind: &mut EventKind) {
        let d = &self.config.defaults;
        let EventKind::StageRun { stage, params } = kind else { return };
        let p = params;
        match stage {
            Stage::Ingested => {}
            Stage::Classified => {
                p.backend.get_or_insert(d.backend);
                p.threshold.get_or_insert(d.threshold);
            }
            Stage::Reviewed => {
                p.backend.get_or_insert(d.backend);
                p.seed.get_or_insert(d.seed);
                p.auditor.get_or_insert(AuditorKind::Pending);
                p.max_rounds.get_or_insert(d.max_rounds);
            }
            Stage::Framed | Stage::Inverted => {
                p.backend.get_or_insert(d.backend);
            }
            Stage::Screened => {}
            Stage::Ranked => {
                p.v.get_or_insert(d.v);
            }
            Stage::Clustered => {
                let ranked = project.ranking.as_ref().map_or(0, |r| r.result.ranking.len());
                p.k.get_or_insert(d.top_k.min(ranked).max(1));
                p.cluster_threshold.get_or_insert(d.cluster_threshold);
            }
        }
    }

    /// Applies one event in place and returns its report. On error the
    /// project may be half-updated; callers apply to a copy.
    pub fn apply(&self, project: &mut Project, kind: &EventKind, ctx: &RunContext) -> Result<Value> {
        let report = match kind {
            EventKind::ProjectCreated { id, name } => {
                project.id = id.clone();
                project.name = name.clone();
                json!({ "id": id, "name": name })
            }
            EventKind::KbSet { kb } => {
                kb.check().map_err(|source| WorkbenchError::Inversion {
                    stage: Stage::Inverted,
                    source,
                })?;
                project.kb = Some(kb.clone());
                project.invalidate_from(Stage::Inverted);
                json!({ "mappings": kb.mappings.len(), "vocabulary": kb.vocabulary.len(), "rules": kb.rules.len() })
            }
            EventKind::ProblemSet { problem, target_env } => {
                problem
                    .validate()
                    .map_err(|m| WorkbenchError::schema("/problem/requirement_elements", m))?;
                project.problem = Some(problem.clone());
                project.target_env = target_env.clone();
                project.invalidate_from(Stage::Ranked);
                json!({ "requirements": problem.requirement_elements.len() })
            }
            EventKind::StageRun { stage, params } => {
                let report = self.run_stage(project, *stage, params, ctx)?;
                project.reports.insert(*stage, report.clone());
                report
            }
            EventKind::SamplesGenerated { params } => self.samples(project, params, ctx)?,
            EventKind::VerdictsRecorded { batch_no, verdicts } => {
                if verdicts.is_empty() {
                    return Err(WorkbenchError::BadRequest("no verdicts given".into()));
                }
                let mut status = BatchStatus::Open;
                for (id, verdict) in verdicts {
                    status = record_verdict(&mut project.batches, *batch_no, id, *verdict)
                        .map_err(corpus(Stage::Reviewed))?;
                }
                settle_review(project);
                json!({ "batch_no": batch_no, "status": status, "review": project.state(Stage::Reviewed) })
            }
            EventKind::ReviewStepped { seed, labels } => self.review_step(project, *seed, labels, ctx)?,
            EventKind::FrameEdited { frame } => {
                let report = validate_frame(frame);
                if !report.is_clean() {
                    return Err(WorkbenchError::Validation(report));
                }
                match project.frames.iter_mut().find(|f| f.id == frame.id) {
                    Some(f) => *f = frame.clone(),
                    None => project.frames.push(frame.clone()),
                }
                project.invalidate_from(Stage::Inverted);
                json!({ "id": frame.id, "valid": true })
            }
            EventKind::UnresolvedWaived { frame_id, waived } => {
                let r = project
                    .inversions
                    .iter_mut()
                    .find(|r| r.id().as_str() == frame_id)
                    .ok_or_else(|| WorkbenchError::NotFound(format!("inversion result {frame_id}")))?;
                r.waived_unresolved = *waived;
                let ready = r.engineering_ready();
                if *waived {
                    project.waived.insert(frame_id.clone());
                } else {
                    project.waived.remove(frame_id);
                }
                project.invalidate_from(Stage::Screened);
                json!({ "id": frame_id, "waived": waived, "engineering_ready": ready })
            }
            EventKind::ScreenVerdictsSet { verdicts } => {
                project
                    .screen_verdicts
                    .extend(verdicts.iter().map(|(k, v)| (k.clone(), v.clone())));
                project.invalidate_from(Stage::Screened);
                json!({ "verdicts": project.screen_verdicts.len() })
            }
            EventKind::JudgmentSet { judgment } => {
                let criteria = CriteriaSet::default();
                judgment.check_against(&criteria).map_err(decision(Stage::Ranked))?;
                let weights = g1_weights(judgment).map_err(decision(Stage::Ranked))?;
                project.judgment = Some(judgment.clone());
                project.invalidate_from(Stage::Ranked);
                json!({ "judgment": judgment, "weights": weights })
            }
            EventKind::ManualScoresSet { scores } => {
                if let Some((alt, c, v)) = scores
                    .iter()
                    .flat_map(|(a, row)| row.iter().map(move |(c, v)| (a, c, *v)))
                    .find(|(_, _, v)| !v.is_finite())
                {
                    return Err(WorkbenchError::schema(format!("/{alt}/{c}"), format!("{v} is not a finite score")));
                }
                let criteria = CriteriaSet::default();
                if let Some(c) = scores
                    .values()
                    .flat_map(|row| row.keys())
                    .find(|c| criteria.get(c).is_none())
                {
                    return Err(WorkbenchError::Decision {
                        stage: Stage::Ranked,
                        source: bioinvert_core::decision::DecisionError::UnknownCriterion(c.clone()),
                    });
                }
                project.manual_scores = scores.clone();
                project.invalidate_from(Stage::Ranked);
                json!({ "alternatives": scores.len() })
            }
        };
        project.head += 1;
        Ok(report)
    }

    fn run_stage(&self, project: &mut Project, stage: Stage, p: &StageParams, ctx: &RunContext) -> Result<Value> {
        if let Some(prev) = stage.previous() {
            if !p.force && !project.is_complete(prev) {
                return Err(WorkbenchError::StageOrder { stage, requires: prev });
            }
        }
        let backend = p.backend.unwrap_or_default();
        let report = match stage {
            Stage::Ingested => {
                if let Some(docs) = &p.docs {
                    project.docs = docs.clone();
                }
                if project.docs.is_empty() {
                    return Err(WorkbenchError::MissingInput("no documents to ingest".into()));
                }
                let mut seen = std::collections::BTreeSet::new();
                let mut sentences = Vec::new();
                for d in &project.docs {
                    if !seen.insert(d.doc_id.as_str()) {
                        return Err(WorkbenchError::BadRequest(format!("duplicate doc_id {:?}", d.doc_id)));
                    }
                    sentences.extend(segment(&d.text, &d.doc_id).map_err(corpus(stage))?);
                }
                project.sentences = sentences;
                json!({ "documents": project.docs.len(), "sentences": project.sentences.len() })
            }
            Stage::Classified => {
                let threshold = p.threshold.unwrap_or(bioinvert_core::corpus::DEFAULT_THRESHOLD);
                if project.sentences.is_empty() {
                    return Err(WorkbenchError::MissingInput("no segmented sentences to classify".into()));
                }
                let labeler = self.labeler(backend, ctx)?;
                let mut labeled = Vec::with_capacity(project.sentences.len());
                for s in &project.sentences {
                    ctx.checkpoint()?;
                    labeled.push(classify(s, &labeler, threshold).map_err(corpus(stage))?);
                }
                let mut per_dim = BTreeMap::new();
                for d in Dimension::ALL {
                    per_dim.insert(d.as_str(), labeled.iter().filter(|l| l.has(d)).count());
                }
                project.labeled = labeled;
                project.batches.clear();
                json!({ "sentences": project.labeled.len(), "labels": per_dim, "backend": backend })
            }
            Stage::Reviewed => {
                if project.labeled.is_empty() {
                    return Err(WorkbenchError::MissingInput("no labeled sentences to review".into()));
                }
                let seed = p.seed.unwrap_or_default();
                project.batches = build_review_batches(&project.labeled, seed);
                if p.auditor.unwrap_or_default() == AuditorKind::Pass {
                    let relabeler = self.labeler(backend, ctx)?;
                    run_review_loop(
                        &mut project.batches,
                        &relabeler,
                        &ConstantAuditor(Verdict::Pass),
                        seed,
                        p.max_rounds.unwrap_or(bioinvert_core::corpus::DEFAULT_MAX_ROUNDS),
                    )
                    .map_err(corpus(stage))?;
                }
                self.finish(project, stage);
                settle_review(project);
                review_report(project)
            }
            Stage::Framed => {
                let client = self.client(backend, ctx)?;
                let summarizer: Box<dyn Summarizer> = match backend {
                    BackendKind::Lexicon => Box::new(RuleSummarizer),
                    _ => Box::new(LlmSummarizer(client)),
                };
                let reviewed = project.reviewed_sentences();
                if reviewed.is_empty() {
                    return Err(WorkbenchError::MissingInput("no labeled sentences to build frames from".into()));
                }
                let mut frames = Vec::new();
                let mut skipped = BTreeMap::new();
                for doc in &project.docs {
                    ctx.checkpoint()?;
                    let sentences: Vec<_> = reviewed
                        .iter()
                        .filter(|s| s.sentence.doc_id == doc.doc_id)
                        .cloned()
                        .collect();
                    match build_frame(&doc.doc_id, &sentences, summarizer.as_ref()) {
                        Ok(f) => frames.push(f),
                        Err(e @ InversionError::MissingDimension(_)) => {
                            skipped.insert(doc.doc_id.clone(), e.to_string());
                        }
                        Err(source) => return Err(WorkbenchError::Inversion { stage, source }),
                    }
                }
                let ids: Vec<_> = frames.iter().map(|f| f.id.clone()).collect();
                project.frames = frames;
                json!({ "frames": ids, "skipped": skipped })
            }
            Stage::Inverted => {
                let kb = project
                    .kb
                    .clone()
                    .ok_or_else(|| WorkbenchError::MissingInput("no engineering knowledge base set".into()))?;
                let corrector = self.client(backend, ctx)?;
                let mut results = Vec::new();
                let mut errors = BTreeMap::new();
                for f in &project.frames {
                    ctx.checkpoint()?;
                    match invert(f, &kb, &corrector) {
                        Ok(r) => results.push(r),
                        Err(InversionError::Partial { error, partial }) => {
                            errors.insert(f.id.as_str().to_string(), format!("{}: {error}", error.code()));
                            results.push(*partial);
                        }
                        Err(e @ (InversionError::KbEmpty | InversionError::KbInvalid(_))) => {
                            return Err(WorkbenchError::Inversion { stage, source: e });
                        }
                        Err(e) => {
                            errors.insert(f.id.as_str().to_string(), format!("{}: {e}", e.code()));
                        }
                    }
                }
                for r in &mut results {
                    r.waived_unresolved = project.waived.contains(r.id().as_str());
                }
                let unresolved: BTreeMap<_, _> = results
                    .iter()
                    .filter(|r| !r.unresolved.is_empty())
                    .map(|r| (r.id().as_str().to_string(), r.unresolved.iter().map(|u| u.term.clone()).collect::<Vec<_>>()))
                    .collect();
                let ids: Vec<_> = results.iter().map(|r| r.id().clone()).collect();
                project.inversions = results;
                project.inversion_errors = errors.clone();
                json!({ "inverted": ids, "errors": errors, "unresolved": unresolved })
            }
            Stage::Screened => {
                if let Some(v) = &p.verdicts {
                    project.screen_verdicts.extend(v.iter().map(|(k, v)| (k.clone(), v.clone())));
                }
                let s = screen(&project.inversions, &project.screen_verdicts)
                    .map_err(|source| WorkbenchError::Inversion { stage, source })?;
                let report = json!({
                    "kept": s.kept.iter().map(|r| r.id()).collect::<Vec<_>>(),
                    "dropped": s.dropped.iter().map(|r| r.id()).collect::<Vec<_>>(),
                });
                project.screening = Some(s);
                report
            }
            Stage::Ranked => {
                let problem = project
                    .problem
                    .clone()
                    .ok_or_else(|| WorkbenchError::MissingInput("no design problem set".into()))?;
                let judgment = project
                    .judgment
                    .clone()
                    .ok_or_else(|| WorkbenchError::MissingInput("no G1 judgment set".into()))?;
                let kept = project.screening.as_ref().map(|s| s.kept.clone()).unwrap_or_default();
                let (ready, blocked): (Vec<_>, Vec<_>) = kept.into_iter().partition(|r| r.engineering_ready());
                let run = rank_strategies(
                    &ready,
                    &problem,
                    project.target_env.as_ref(),
                    &judgment,
                    &project.manual_scores,
                    p.v.unwrap_or(bioinvert_core::decision::DEFAULT_V),
                )
                .map_err(decision(stage))?;
                let report = json!({
                    "ranking": run.result.ranking,
                    "compromise_set": run.result.compromise_set,
                    "blocked_unresolved": blocked.iter().map(|r| r.id()).collect::<Vec<_>>(),
                    "warnings": run.result.warnings,
                });
                project.ranking = Some(run);
                report
            }
            Stage::Clustered => {
                let run = project
                    .ranking
                    .as_ref()
                    .ok_or_else(|| WorkbenchError::MissingInput("no ranking to cluster".into()))?;
                let frames: Vec<_> = project
                    .screening
                    .iter()
                    .flat_map(|s| s.kept.iter().map(|r| r.engineering_frame.clone()))
                    .collect();
                let k = p.k.unwrap_or(run.result.ranking.len());
                let threshold = p.cluster_threshold.unwrap_or(0.5);
                let report = cluster_top(&run.result, &frames, k, threshold).map_err(decision(stage))?;
                let value = json!({
                    "clusters": report.clusters.iter().map(|c| &c.members).collect::<Vec<_>>(),
                    "threshold": threshold,
                    "k": k,
                });
                project.clusters = Some(report);
                value
            }
        };
        if stage != Stage::Reviewed {
            self.finish(project, stage);
        }
        Ok(report)
    }

    fn finish(&self, project: &mut Project, stage: Stage) {
        project.invalidate_from(stage);
        project.stages.insert(stage, StageState::Complete);
    }

    fn samples(&self, project: &mut Project, p: &SampleParams, ctx: &RunContext) -> Result<Value> {
        if !project.is_complete(Stage::Reviewed) {
            return Err(WorkbenchError::StageOrder {
                stage: Stage::Reviewed,
                requires: Stage::Reviewed,
            });
        }
        let paraphraser = LlmParaphraser(self.client(p.backend, ctx)?);
        let set = generate_samples(
            &project.reviewed_sentences(),
            p.target_size,
            p.ratio_real,
            p.seed,
            &paraphraser,
        )
        .map_err(corpus(Stage::Reviewed))?;
        let report = json!({ "real": set.real.len(), "augmented": set.augmented.len(), "seed": set.seed });
        project.samples = Some(Stamped { value: set, stale: false });
        Ok(report)
    }

    fn review_step(
        &self,
        project: &mut Project,
        seed: u64,
        labels: &BTreeMap<String, Vec<Dimension>>,
        ctx: &RunContext,
    ) -> Result<Value> {
        if project.batches.is_empty() {
            return Err(WorkbenchError::StageOrder {
                stage: Stage::Reviewed,
                requires: Stage::Classified,
            });
        }
        for id in labels.keys() {
            let dirty = project
                .batches
                .iter()
                .filter(|b| b.status == BatchStatus::Dirty)
                .any(|b| b.items.iter().any(|i| &i.sentence.id == id));
            if !dirty {
                return Err(WorkbenchError::NotFound(format!("sentence {id} in a Dirty batch")));
            }
        }
        let backend = project
            .reports
            .get(&Stage::Classified)
            .and_then(|r| serde_json::from_value(r["backend"].clone()).ok())
            .unwrap_or_default();
        let relabeler = Corrected {
            human: labels.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
            base: self.labeler(backend, ctx)?,
        };
        let step = review_loop_step(&mut project.batches, &relabeler, &PendingAuditor, seed)
            .map_err(corpus(Stage::Reviewed))?;
        for item in project.batches.iter_mut().flat_map(|b| b.items.iter_mut()) {
            if labels.contains_key(&item.sentence.id) {
                item.label_source = LabelSource::Human;
            }
        }
        settle_review(project);
        let mut report = review_report(project);
        report["relabeled"] = json!(step.relabeled);
        Ok(report)
    }
}

/// Reviewed is Complete once every batch is Clean and Pending otherwise.
/// A change of review outcome invalidates everything built on it.
fn settle_review(project: &mut Project) {
    let clean = project.batches.iter().all(|b| b.status == BatchStatus::Clean);
    let state = if clean { StageState::Complete } else { StageState::Pending };
    if project.state(Stage::Reviewed) != Some(state) || !clean {
        project.invalidate_from(Stage::Framed);
    }
    if !clean {
        if let Some(s) = &mut project.samples {
            s.stale = true;
        }
    }
    project.stages.insert(Stage::Reviewed, state);
}

fn review_report(project: &Project) -> Value {
    let count = |s: BatchStatus| project.batches.iter().filter(|b| b.status == s).count();
    json!({
        "batches": project.batches.len(),
        "audited": project.batches.iter().map(|b| b.audit_sample.len()).sum::<usize>(),
        "clean": count(BatchStatus::Clean),
        "open": count(BatchStatus::Open),
        "dirty": count(BatchStatus::Dirty),
        "state": project.state(Stage::Reviewed),
    })
}

fn corpus(stage: Stage) -> impl Fn(CorpusError) -> WorkbenchError {
    move |source| WorkbenchError::Corpus { stage, source }
}

fn decision(stage: Stage) -> impl Fn(bioinvert_core::decision::DecisionError) -> WorkbenchError {
    move |source| WorkbenchError::Decision { stage, source }
}

enum Labeler {
    Lexicon(&'static LexiconClassifier),
    Llm(LlmClassifier),
}

impl Classifier for Labeler {
    fn source(&self) -> LabelSource {
        match self {
            Labeler::Lexicon(c) => c.source(),
            Labeler::Llm(c) => c.source(),
        }
    }

    fn scores(&self, sentence: &SentenceRecord) -> std::result::Result<Scores, CorpusError> {
        match self {
            Labeler::Lexicon(c) => c.scores(sentence),
            Labeler::Llm(c) => c.scores(sentence),
        }
    }
}

/// Designer corrections over the project's classifier.
struct Corrected {
    human: HashMap<String, Vec<Dimension>>,
    base: Labeler,
}

impl Classifier for Corrected {
    fn source(&self) -> LabelSource {
        self.base.source()
    }

    fn scores(&self, sentence: &SentenceRecord) -> std::result::Result<Scores, CorpusError> {
        match self.human.get(&sentence.id) {
            Some(labels) => Ok(Scores::indicator(labels)),
            None => self.base.scores(sentence),
        }
    }
}
