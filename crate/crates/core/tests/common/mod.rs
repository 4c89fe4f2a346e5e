#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use bioinvert_core::inversion::EngineeringKB;
use bioinvert_core::knowledge::{parse_frame, StrategyFrame};
use bioinvert_core::llm::{LlmClient, MockBackend};

pub fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture(rel: &str) -> String {
    let path = root().join(rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn frame(name: &str) -> StrategyFrame {
    parse_frame(&fixture(&format!("fixtures/frames/{name}.json"))).unwrap()
}

pub fn demo_kb() -> EngineeringKB {
    EngineeringKB::from_json(&fixture("fixtures/kb-soft-robot.json")).unwrap()
}

pub fn mock_client() -> Arc<LlmClient> {
    Arc::new(LlmClient::new(MockBackend::bundled()))
}

pub const EXAMPLE_FRAMES: [&str; 3] = ["fin-swim", "jet-propulsion", "wave-crawl"];
