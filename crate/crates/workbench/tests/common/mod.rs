#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bioinvert_core::corpus::parse_corpus_jsonl;
use bioinvert_core::inversion::{EngineeringKB, ScreenVerdict};
use bioinvert_workbench::project::{AuditorKind, BackendKind};
use bioinvert_workbench::{Config, Engine, EventKind, ProjectDir, Stage, StageParams};

pub fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture(rel: &str) -> String {
    let path = root().join(rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn json(rel: &str) -> serde_json::Value {
    serde_json::from_str(&fixture(rel)).unwrap()
}

pub fn engine() -> Engine {
    Engine::new(Config::default())
}

pub const DEMO_IDS: [&str; 3] = ["fish-tail", "squid-jet", "inchworm-crawl"];

pub fn run(stage: Stage, params: StageParams) -> EventKind {
    EventKind::StageRun { stage, params }
}

pub fn mock(seed: Option<u64>) -> StageParams {
    StageParams {
        backend: Some(BackendKind::Mock),
        seed,
        ..Default::default()
    }
}

/// Setup events: KB, problem and the ingested demo corpus.
pub fn demo_setup() -> Vec<EventKind> {
    let kb = EngineeringKB::from_json(&fixture("fixtures/kb-soft-robot.json")).unwrap();
    vec![
        EventKind::KbSet { kb },
        EventKind::ProblemSet {
            problem: serde_json::from_value(json("fixtures/demo/problem.json")).unwrap(),
            target_env: Some(serde_json::from_value(json("fixtures/demo/target-environment.json")).unwrap()),
        },
        run(
            Stage::Ingested,
            StageParams {
                docs: Some(parse_corpus_jsonl(&fixture("fixtures/demo/corpus.jsonl")).unwrap()),
                ..Default::default()
            },
        ),
    ]
}

/// The whole workflow with the mock backend, auditing with an all-pass auditor.
pub fn demo_workflow(seed: u64) -> Vec<EventKind> {
    let mut events = demo_setup();
    events.push(run(Stage::Classified, mock(None)));
    events.push(run(
        Stage::Reviewed,
        StageParams {
            auditor: Some(AuditorKind::Pass),
            ..mock(Some(seed))
        },
    ));
    events.push(run(Stage::Framed, mock(None)));
    events.push(run(Stage::Inverted, mock(None)));
    events.extend(DEMO_IDS.map(|id| EventKind::UnresolvedWaived {
        frame_id: id.into(),
        waived: true,
    }));
    events.push(EventKind::ScreenVerdictsSet {
        verdicts: DEMO_IDS.iter().map(|id| (id.to_string(), ScreenVerdict::Keep)).collect::<BTreeMap<_, _>>(),
    });
    events.push(run(Stage::Screened, StageParams::default()));
    events.push(EventKind::JudgmentSet {
        judgment: serde_json::from_value(json("fixtures/demo/judgment.json")).unwrap(),
    });
    events.push(EventKind::ManualScoresSet {
        scores: serde_json::from_value(json("fixtures/demo/manual-scores.json")).unwrap(),
    });
    events.push(run(Stage::Ranked, StageParams::default()));
    events.push(run(Stage::Clustered, StageParams::default()));
    events
}

pub fn create(dir: &Path, engine: &Engine) -> ProjectDir {
    ProjectDir::create(dir, "demo", "Demo soft robot", engine).unwrap().0
}

/// Runs `events` on a fresh project in `dir`; panics on the first failure.
pub fn run_all(dir: &Path, engine: &Engine, events: Vec<EventKind>) -> ProjectDir {
    let p = create(dir, engine);
    for (i, e) in events.into_iter().enumerate() {
        let name = e.name();
        if let Err(err) = p.execute(engine, e, None, None) {
            panic!("event {i} ({name}) failed: {err}");
        }
    }
    p
}
