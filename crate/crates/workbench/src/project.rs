use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use bioinvert_core::corpus::{CorpusDoc, LabeledSentence, ReviewBatch, SampleSet, SentenceRecord, Verdict};
use bioinvert_core::decision::{ClusterReport, G1Judgment, ManualScores, RankingRun};
use bioinvert_core::inversion::{EngineeringKB, InversionResult, ScreenVerdict, Screening};
use bioinvert_core::knowledge::{DesignProblem, Dimension, EnvironmentDesc, StrategyFrame};
use serde::{Deserialize, Serialize};

/// Version key of `project.json`, `events.jsonl` records and export bundles.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingested,
    Classified,
    Reviewed,
    Framed,
    Inverted,
    Screened,
    Ranked,
    Clustered,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingested,
        Stage::Classified,
        Stage::Reviewed,
        Stage::Framed,
        Stage::Inverted,
        Stage::Screened,
        Stage::Ranked,
        Stage::Clustered,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingested => "ingested",
            Stage::Classified => "classified",
            Stage::Reviewed => "reviewed",
            Stage::Framed => "framed",
            Stage::Inverted => "inverted",
            Stage::Screened => "screened",
            Stage::Ranked => "ranked",
            Stage::Clustered => "clustered",
        }
    }

    pub fn previous(self) -> Option<Stage> {
        let i = Stage::ALL.iter().position(|s| *s == self)?;
        i.checked_sub(1).map(|j| Stage::ALL[j])
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StageState {
    /// Ran, but waits on designer input (review verdicts).
    Pending,
    Complete,
    /// An upstream stage was re-run; artifacts are kept for reference.
    Stale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Lexicon,
    Mock,
    Llm,
}

impl FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lexicon" => Ok(BackendKind::Lexicon),
            "mock" => Ok(BackendKind::Mock),
            "llm" => Ok(BackendKind::Llm),
            _ => Err(format!("unknown backend {s:?} (lexicon, mock or llm)")),
        }
    }
}

/// Who audits freshly drawn review samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditorKind {
    /// Leave verdicts to the designer.
    #[default]
    Pending,
    /// Accept every audited label.
    Pass,
}

/// Stage inputs. Only the fields the stage reads matter; missing ones are
/// filled from the config before the event is recorded.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendKind>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub force: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub docs: Option<Vec<CorpusDoc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auditor: Option<AuditorKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_rounds: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdicts: Option<BTreeMap<String, ScreenVerdict>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleParams {
    pub seed: u64,
    pub target_size: usize,
    pub ratio_real: f64,
    pub backend: BackendKind,
}

/// A state change. The project is the fold of its events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventKind {
    ProjectCreated {
        id: String,
        name: String,
    },
    KbSet {
        kb: EngineeringKB,
    },
    ProblemSet {
        problem: DesignProblem,
        #[serde(default)]
        target_env: Option<EnvironmentDesc>,
    },
    StageRun {
        stage: Stage,
        params: StageParams,
    },
    SamplesGenerated {
        params: SampleParams,
    },
    VerdictsRecorded {
        batch_no: u32,
        verdicts: BTreeMap<String, Verdict>,
    },
    /// Relabels Dirty batches with designer corrections and redraws their audits.
    ReviewStepped {
        seed: u64,
        #[serde(default)]
        labels: BTreeMap<String, Vec<Dimension>>,
    },
    FrameEdited {
        frame: StrategyFrame,
    },
    UnresolvedWaived {
        frame_id: String,
        waived: bool,
    },
    ScreenVerdictsSet {
        verdicts: BTreeMap<String, ScreenVerdict>,
    },
    JudgmentSet {
        judgment: G1Judgment,
    },
    ManualScoresSet {
        scores: ManualScores,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::ProjectCreated { .. } => "project_created",
            EventKind::KbSet { .. } => "kb_set",
            EventKind::ProblemSet { .. } => "problem_set",
            EventKind::StageRun { .. } => "stage_run",
            EventKind::SamplesGenerated { .. } => "samples_generated",
            EventKind::VerdictsRecorded { .. } => "verdicts_recorded",
            EventKind::ReviewStepped { .. } => "review_stepped",
            EventKind::FrameEdited { .. } => "frame_edited",
            EventKind::UnresolvedWaived { .. } => "unresolved_waived",
            EventKind::ScreenVerdictsSet { .. } => "screen_verdicts_set",
            EventKind::JudgmentSet { .. } => "judgment_set",
            EventKind::ManualScoresSet { .. } => "manual_scores_set",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub value: T,
    pub stale: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Project {
    pub fbce_version: u32,
    pub id: String,
    pub name: String,
    /// Sequence number of the last applied event.
    pub head: u64,
    pub stages: BTreeMap<Stage, StageState>,
    /// Last report of each stage run.
    pub reports: BTreeMap<Stage, serde_json::Value>,
    pub docs: Vec<CorpusDoc>,
    pub sentences: Vec<SentenceRecord>,
    pub labeled: Vec<LabeledSentence>,
    pub batches: Vec<ReviewBatch>,
    pub samples: Option<Stamped<SampleSet>>,
    pub frames: Vec<StrategyFrame>,
    pub kb: Option<EngineeringKB>,
    pub problem: Option<DesignProblem>,
    pub target_env: Option<EnvironmentDesc>,
    pub inversions: Vec<InversionResult>,
    /// Per-frame inversion failures (frame id → error).
    pub inversion_errors: BTreeMap<String, String>,
    pub waived: BTreeSet<String>,
    pub screen_verdicts: BTreeMap<String, ScreenVerdict>,
    pub screening: Option<Screening>,
    pub judgment: Option<G1Judgment>,
    pub manual_scores: ManualScores,
    pub ranking: Option<RankingRun>,
    pub clusters: Option<ClusterReport>,
}

impl Project {
    pub fn empty(id: &str, name: &str) -> Self {
        Project {
            fbce_version: SCHEMA_VERSION,
            id: id.into(),
            name: name.into(),
            head: 0,
            stages: BTreeMap::new(),
            reports: BTreeMap::new(),
            docs: vec![],
            sentences: vec![],
            labeled: vec![],
            batches: vec![],
            samples: None,
            frames: vec![],
            kb: None,
            problem: None,
            target_env: None,
            inversions: vec![],
            inversion_errors: BTreeMap::new(),
            waived: BTreeSet::new(),
            screen_verdicts: BTreeMap::new(),
            screening: None,
            judgment: None,
            manual_scores: BTreeMap::new(),
            ranking: None,
            clusters: None,
        }
    }

    pub fn state(&self, stage: Stage) -> Option<StageState> {
        self.stages.get(&stage).copied()
    }

    pub fn is_complete(&self, stage: Stage) -> bool {
        self.state(stage) == Some(StageState::Complete)
    }

    /// Furthest stage reached with every earlier stage complete.
    pub fn current_stage(&self) -> Option<Stage> {
        Stage::ALL
            .into_iter()
            .take_while(|s| self.is_complete(*s))
            .last()
    }

    /// Marks `from` and every later stage that has run as Stale.
    pub fn invalidate_from(&mut self, from: Stage) {
        for (stage, state) in self.stages.iter_mut() {
            if *stage >= from {
                *state = StageState::Stale;
            }
        }
        if from <= Stage::Reviewed {
            if let Some(s) = &mut self.samples {
                s.stale = true;
            }
        }
    }

    /// Review batch items in corpus order; the labeled corpus before review.
    pub fn reviewed_sentences(&self) -> Vec<LabeledSentence> {
        if self.batches.is_empty() {
            return self.labeled.clone();
        }
        self.batches.iter().flat_map(|b| b.items.iter().cloned()).collect()
    }

    pub fn frame(&self, id: &str) -> Option<&StrategyFrame> {
        self.frames.iter().find(|f| f.id.as_str() == id)
    }

    pub fn summary(&self) -> ProjectSummary {
        ProjectSummary {
            id: self.id.clone(),
            name: self.name.clone(),
            head: self.head,
            stage: self.current_stage(),
            stages: self.stages.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectSummary {
    pub id: String,
    pub name: String,
    pub head: u64,
    pub stage: Option<Stage>,
    pub stages: BTreeMap<Stage, StageState>,
}
