use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{DecisionError, VikorResult};
use crate::knowledge::{compose, ElementaryId, ElementaryStrategy, FrameId, StrategyFrame};
use crate::text::{content_stems, jaccard};

const W_FUNCTIONS: f64 = 0.4;
const W_BEHAVIOR: f64 = 0.3;
const W_CHARACTERISTICS: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub members: Vec<String>,
    /// Two or more members: a candidate composite method.
    pub composite_candidate: bool,
    pub composite: Option<StrategyFrame>,
    /// Why composition failed, e.g. conflicting environments.
    pub composite_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    /// Top-k ids in ranking order; indexes `similarity`.
    pub members: Vec<String>,
    pub similarity: Vec<Vec<f64>>,
    pub threshold: f64,
    pub clusters: Vec<Cluster>,
}

struct Tokens {
    functions: BTreeSet<String>,
    behavior: BTreeSet<String>,
    characteristics: BTreeSet<String>,
}

fn tokens(f: &StrategyFrame) -> Tokens {
    let union = |phrases: Vec<String>| phrases.iter().flat_map(|p| content_stems(p)).collect();
    let mut behavior = vec![f.behavior.summary.clone()];
    behavior.extend(f.behavior.steps.iter().map(|s| s.phrase()));
    Tokens {
        functions: union(f.functions.iter().map(|x| x.phrase()).collect()),
        behavior: union(behavior),
        characteristics: union(f.characteristics.iter().map(|c| c.phrase()).collect()),
    }
}

/// Weighted token-set overlap: functions 0.4, behavior 0.3, characteristics 0.3.
pub fn similarity(a: &StrategyFrame, b: &StrategyFrame) -> f64 {
    let (a, b) = (tokens(a), tokens(b));
    W_FUNCTIONS * jaccard(&a.functions, &b.functions)
        + W_BEHAVIOR * jaccard(&a.behavior, &b.behavior)
        + W_CHARACTERISTICS * jaccard(&a.characteristics, &b.characteristics)
}

/// Average-linkage clustering of the `k` best-ranked strategies, merging
/// while the closest pair of clusters is at least `threshold` similar.
pub fn cluster_top(
    result: &VikorResult,
    frames: &[StrategyFrame],
    k: usize,
    threshold: f64,
) -> Result<ClusterReport, DecisionError> {
    if k == 0 || k > result.ranking.len() {
        return Err(DecisionError::KOutOfRange {
            k,
            available: result.ranking.len(),
        });
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(DecisionError::BadThreshold(threshold));
    }
    let members: Vec<String> = result.ranking[..k].to_vec();
    let top: Vec<&StrategyFrame> = members
        .iter()
        .map(|id| {
            frames
                .iter()
                .find(|f| f.id.as_str() == id)
                .ok_or_else(|| DecisionError::MissingFrame(id.clone()))
        })
        .collect::<Result<_, _>>()?;

    let toks: Vec<Tokens> = top.iter().map(|f| tokens(f)).collect();
    let mut sim = vec![vec![0.0; k]; k];
    for i in 0..k {
        sim[i][i] = 1.0;
        for j in i + 1..k {
            let s = W_FUNCTIONS * jaccard(&toks[i].functions, &toks[j].functions)
                + W_BEHAVIOR * jaccard(&toks[i].behavior, &toks[j].behavior)
                + W_CHARACTERISTICS * jaccard(&toks[i].characteristics, &toks[j].characteristics);
            sim[i][j] = s;
            sim[j][i] = s;
        }
    }

    let mut groups: Vec<Vec<usize>> = (0..k).map(|i| vec![i]).collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..groups.len() {
            for b in a + 1..groups.len() {
                let link = average_link(&sim, &groups[a], &groups[b]);
                if best.is_none_or(|(s, _, _)| link > s) {
                    best = Some((link, a, b));
                }
            }
        }
        match best {
            Some((s, a, b)) if s >= threshold => {
                let merged = groups.remove(b);
                groups[a].extend(merged);
                groups[a].sort_unstable();
            }
            _ => break,
        }
    }
    groups.sort_by_key(|g| g[0]);

    let clusters = groups
        .into_iter()
        .map(|g| {
            let ids: Vec<String> = g.iter().map(|&i| members[i].clone()).collect();
            if g.len() < 2 {
                return Cluster {
                    members: ids,
                    composite_candidate: false,
                    composite: None,
                    composite_error: None,
                };
            }
            let parts: Vec<ElementaryStrategy> = g
                .iter()
                .enumerate()
                .map(|(n, &i)| ElementaryStrategy::from_frame(ElementaryId(n as u32 + 1), top[i]))
                .collect();
            let (composite, composite_error) = match compose(&parts) {
                Ok(mut c) => {
                    c.id = FrameId(ids.join("+"));
                    c.provenance.elementary_ids = g
                        .iter()
                        .flat_map(|&i| top[i].provenance.elementary_ids.iter().copied())
                        .fold(Vec::new(), |mut acc, e| {
                            if !acc.contains(&e) {
                                acc.push(e);
                            }
                            acc
                        });
                    c.provenance.notes = format!("composite of {}", ids.join(", "));
                    (Some(c), None)
                }
                Err(e) => (None, Some(e.to_string())),
            };
            Cluster {
                members: ids,
                composite_candidate: true,
                composite,
                composite_error,
            }
        })
        .collect();

    Ok(ClusterReport {
        members,
        similarity: sim,
        threshold,
        clusters,
    })
}

fn average_link(sim: &[Vec<f64>], a: &[usize], b: &[usize]) -> f64 {
    let total: f64 = a.iter().flat_map(|&i| b.iter().map(move |&j| sim[i][j])).sum();
    total / (a.len() * b.len()) as f64
}
