//! Multi-criteria ranking of engineering strategies: G1 order-relation
//! weights, VIKOR compromise ranking and similarity clustering.

mod cluster;
mod rank;
mod score;
mod vikor;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cluster::{cluster_top, similarity, Cluster, ClusterReport};
pub use rank::{
    matrix_from_csv, matrix_to_csv, rank_strategies, report_json, ManualScores, RankingRun,
};
pub use score::{score_auto_criteria, AutoScores};
pub use vikor::{vikor, AlternativeScore, Conditions, VikorResult, VikorWarning};

pub const FUNCTIONAL_COMPLIANCE: &str = "functional_compliance";
pub const BEHAVIORAL_ALIGNMENT: &str = "behavioral_alignment";
pub const CHARACTERISTIC_CONSISTENCY: &str = "characteristic_consistency";
pub const ENVIRONMENTAL_MIGRATION: &str = "environmental_migration";
pub const RELIABILITY: &str = "reliability";
pub const ECONOMIC_TOLERANCE: &str = "economic_tolerance";

/// Conventional G1 ratio scale.
pub const RATIO_MIN: f64 = 1.0;
pub const RATIO_MAX: f64 = 1.8;

pub const DEFAULT_V: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecisionError {
    #[error("BAD_RATIO: r_{index} = {value} is outside [1.0, 1.8]")]
    BadRatio { index: usize, value: f64 },
    #[error("LENGTH_MISMATCH: {0}")]
    LengthMismatch(String),
    #[error("DUPLICATE_CRITERION: {0}")]
    DuplicateCriterion(String),
    #[error("UNKNOWN_CRITERION: {0}")]
    UnknownCriterion(String),
    #[error("MISSING_WEIGHT: no weight for {0}")]
    MissingWeight(String),
    #[error("BAD_MATRIX: {0}")]
    BadMatrix(String),
    #[error("BAD_V: v = {0} is outside [0, 1]")]
    BadV(f64),
    #[error("NO_DISCRIMINATION: every criterion has the same value for all alternatives")]
    NoDiscrimination,
    #[error("NO_ALTERNATIVES: nothing to rank")]
    NoAlternatives,
    #[error("MISSING_MANUAL_SCORE: {alternative} has no {criterion} score")]
    MissingManualScore {
        alternative: String,
        criterion: String,
    },
    #[error("K_OUT_OF_RANGE: k = {k} with {available} ranked alternatives")]
    KOutOfRange { k: usize, available: usize },
    #[error("BAD_THRESHOLD: {0} is outside (0, 1]")]
    BadThreshold(f64),
    #[error("MISSING_FRAME: no frame for {0}")]
    MissingFrame(String),
    #[error("CSV_ERROR: {0}")]
    Csv(String),
}

impl DecisionError {
    pub fn code(&self) -> &'static str {
        match self {
            DecisionError::BadRatio { .. } => "BAD_RATIO",
            DecisionError::LengthMismatch(_) => "LENGTH_MISMATCH",
            DecisionError::DuplicateCriterion(_) => "DUPLICATE_CRITERION",
            DecisionError::UnknownCriterion(_) => "UNKNOWN_CRITERION",
            DecisionError::MissingWeight(_) => "MISSING_WEIGHT",
            DecisionError::BadMatrix(_) => "BAD_MATRIX",
            DecisionError::BadV(_) => "BAD_V",
            DecisionError::NoDiscrimination => "NO_DISCRIMINATION",
            DecisionError::NoAlternatives => "NO_ALTERNATIVES",
            DecisionError::MissingManualScore { .. } => "MISSING_MANUAL_SCORE",
            DecisionError::KOutOfRange { .. } => "K_OUT_OF_RANGE",
            DecisionError::BadThreshold(_) => "BAD_THRESHOLD",
            DecisionError::MissingFrame(_) => "MISSING_FRAME",
            DecisionError::Csv(_) => "CSV_ERROR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Benefit,
    Cost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scoring {
    Auto,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: String,
    pub name: String,
    pub direction: Direction,
    pub scoring: Scoring,
}

impl Criterion {
    pub fn benefit(id: &str, name: &str, scoring: Scoring) -> Self {
        Criterion {
            id: id.into(),
            name: name.into(),
            direction: Direction::Benefit,
            scoring,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CriteriaSet(pub Vec<Criterion>);

impl Default for CriteriaSet {
    /// The six strategy indicators. All are larger-is-better.
    fn default() -> Self {
        use Scoring::{Auto, Manual};
        CriteriaSet(vec![
            Criterion::benefit(FUNCTIONAL_COMPLIANCE, "Functional compliance", Auto),
            Criterion::benefit(BEHAVIORAL_ALIGNMENT, "Behavioral alignment", Auto),
            Criterion::benefit(CHARACTERISTIC_CONSISTENCY, "Characteristic consistency", Auto),
            Criterion::benefit(ENVIRONMENTAL_MIGRATION, "Environmental migration potential", Auto),
            Criterion::benefit(RELIABILITY, "Reliability", Manual),
            Criterion::benefit(ECONOMIC_TOLERANCE, "Economic tolerance", Manual),
        ])
    }
}

impl CriteriaSet {
    pub fn ids(&self) -> Vec<&str> {
        self.0.iter().map(|c| c.id.as_str()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&Criterion> {
        self.0.iter().find(|c| c.id == id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check(&self) -> Result<(), DecisionError> {
        if self.0.is_empty() {
            return Err(DecisionError::BadMatrix("no criteria".into()));
        }
        unique(self.0.iter().map(|c| c.id.as_str()))
    }
}

fn unique<'a>(ids: impl Iterator<Item = &'a str> + Clone) -> Result<(), DecisionError> {
    match first_duplicate(ids) {
        Some(id) => Err(DecisionError::DuplicateCriterion(id.to_string())),
        None => Ok(()),
    }
}

/// Pairwise scan for short lists, sort beyond that.
fn first_duplicate<'a>(ids: impl Iterator<Item = &'a str> + Clone) -> Option<&'a str> {
    if ids.clone().nth(16).is_none() {
        return ids
            .clone()
            .enumerate()
            .find(|&(i, id)| ids.clone().take(i).any(|x| x == id))
            .map(|(_, id)| id);
    }
    let mut all: Vec<&str> = ids.collect();
    all.sort_unstable();
    all.windows(2).find(|w| w[0] == w[1]).map(|w| w[0])
}

/// Designer's order of importance (most first) and the adjacent ratios
/// `r_k = w_{k-1} / w_k` for k = 2..m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct G1Judgment {
    pub order: Vec<String>,
    pub ratios: Vec<f64>,
}

impl G1Judgment {
    /// The six default criteria in listed order with all ratios 1.0.
    pub fn equal(criteria: &CriteriaSet) -> Self {
        G1Judgment {
            order: criteria.0.iter().map(|c| c.id.clone()).collect(),
            ratios: vec![1.0; criteria.len().saturating_sub(1)],
        }
    }

    pub fn check(&self) -> Result<(), DecisionError> {
        if self.order.is_empty() {
            return Err(DecisionError::LengthMismatch("order is empty".into()));
        }
        if self.ratios.len() + 1 != self.order.len() {
            return Err(DecisionError::LengthMismatch(format!(
                "{} criteria need {} ratios, got {}",
                self.order.len(),
                self.order.len() - 1,
                self.ratios.len()
            )));
        }
        unique(self.order.iter().map(String::as_str))?;
        for (i, r) in self.ratios.iter().enumerate() {
            if !(RATIO_MIN..=RATIO_MAX).contains(r) {
                return Err(DecisionError::BadRatio {
                    index: i + 2,
                    value: *r,
                });
            }
        }
        Ok(())
    }

    /// Checks that `order` is a permutation of the set's ids.
    pub fn check_against(&self, criteria: &CriteriaSet) -> Result<(), DecisionError> {
        self.check()?;
        if self.order.len() != criteria.len() {
            return Err(DecisionError::LengthMismatch(format!(
                "judgment orders {} criteria, the set has {}",
                self.order.len(),
                criteria.len()
            )));
        }
        match self.order.iter().find(|id| criteria.get(id).is_none()) {
            Some(id) => Err(DecisionError::UnknownCriterion(id.clone())),
            None => Ok(()),
        }
    }
}

/// Criterion weights keyed by id, plus the order they were derived in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub order: Vec<String>,
    pub values: BTreeMap<String, f64>,
}

impl Weights {
    pub fn get(&self, id: &str) -> Option<f64> {
        self.values.get(id).copied()
    }

    /// Weights in G1 order.
    pub fn ordered(&self) -> Vec<f64> {
        self.order.iter().map(|id| self.values[id]).collect()
    }

    pub fn equal(ids: &[&str]) -> Self {
        let w = 1.0 / ids.len() as f64;
        Weights {
            order: ids.iter().map(|s| s.to_string()).collect(),
            values: ids.iter().map(|s| (s.to_string(), w)).collect(),
        }
    }
}

/// G1 weights: `w_m = 1 / (1 + Σ_{k=2..m} Π_{j=k..m} r_j)`, then
/// `w_{k-1} = r_k · w_k` back up the order.
pub fn g1_weights(judgment: &G1Judgment) -> Result<Weights, DecisionError> {
    judgment.check()?;
    let m = judgment.order.len();
    let r = &judgment.ratios;
    // r[k - 2] is r_k.
    let mut tail_sum = 0.0;
    let mut product = 1.0;
    for k in (2..=m).rev() {
        product *= r[k - 2];
        tail_sum += product;
    }
    let mut w = vec![0.0; m];
    w[m - 1] = 1.0 / (1.0 + tail_sum);
    for k in (2..=m).rev() {
        w[k - 2] = r[k - 2] * w[k - 1];
    }
    Ok(Weights {
        order: judgment.order.clone(),
        values: judgment.order.iter().cloned().zip(w).collect(),
    })
}

/// Alternatives × criteria score table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionMatrix {
    pub alternatives: Vec<String>,
    pub criteria: CriteriaSet,
    pub scores: Vec<Vec<f64>>,
}

impl DecisionMatrix {
    pub fn check(&self) -> Result<(), DecisionError> {
        self.criteria.check()?;
        if self.alternatives.is_empty() {
            return Err(DecisionError::NoAlternatives);
        }
        if let Some(a) = first_duplicate(self.alternatives.iter().map(String::as_str)) {
            return Err(DecisionError::BadMatrix(format!("duplicate alternative {a}")));
        }
        if self.scores.len() != self.alternatives.len() {
            return Err(DecisionError::BadMatrix(format!(
                "{} rows for {} alternatives",
                self.scores.len(),
                self.alternatives.len()
            )));
        }
        for (a, row) in self.alternatives.iter().zip(&self.scores) {
            if row.len() != self.criteria.len() {
                return Err(DecisionError::BadMatrix(format!(
                    "row {a} has {} cells, expected {}",
                    row.len(),
                    self.criteria.len()
                )));
            }
            if let Some(j) = row.iter().position(|x| !x.is_finite()) {
                return Err(DecisionError::BadMatrix(format!(
                    "{a}/{} is not a finite number",
                    self.criteria.0[j].id
                )));
            }
        }
        Ok(())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.scores.iter().map(|row| row[j]).collect()
    }
}
