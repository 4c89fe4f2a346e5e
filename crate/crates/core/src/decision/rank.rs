use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    g1_weights, score_auto_criteria, vikor, AutoScores, CriteriaSet, DecisionError,
    DecisionMatrix, G1Judgment, Scoring, VikorResult, Weights,
};
use crate::inversion::InversionResult;
use crate::knowledge::{DesignProblem, EnvironmentDesc};

/// Designer-entered scores: alternative id → criterion id → value.
pub type ManualScores = BTreeMap<String, BTreeMap<String, f64>>;

/// One ranking run with everything needed to audit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRun {
    pub judgment: G1Judgment,
    pub weights: Weights,
    pub auto_scores: BTreeMap<String, AutoScores>,
    pub matrix: DecisionMatrix,
    pub result: VikorResult,
}

/// Scores the kept strategies on the default six criteria, weights them
/// with G1 and ranks them with VIKOR.
pub fn rank_strategies(
    kept: &[InversionResult],
    problem: &DesignProblem,
    target_env: Option<&EnvironmentDesc>,
    judgment: &G1Judgment,
    manual: &ManualScores,
    v: f64,
) -> Result<RankingRun, DecisionError> {
    if kept.is_empty() {
        return Err(DecisionError::NoAlternatives);
    }
    let criteria = CriteriaSet::default();
    judgment.check_against(&criteria)?;
    let weights = g1_weights(judgment)?;

    let mut auto_scores = BTreeMap::new();
    let mut alternatives = Vec::with_capacity(kept.len());
    let mut scores = Vec::with_capacity(kept.len());
    for r in kept {
        let id = r.id().as_str().to_string();
        let auto = score_auto_criteria(r, problem, target_env);
        let mut row = Vec::with_capacity(criteria.len());
        for c in &criteria.0 {
            let value = match c.scoring {
                Scoring::Auto => auto.get(&c.id).expect("auto criterion has a scorer"),
                Scoring::Manual => manual
                    .get(&id)
                    .and_then(|m| m.get(&c.id))
                    .copied()
                    .ok_or_else(|| DecisionError::MissingManualScore {
                        alternative: id.clone(),
                        criterion: c.id.clone(),
                    })?,
            };
            row.push(value);
        }
        auto_scores.insert(id.clone(), auto);
        alternatives.push(id);
        scores.push(row);
    }
    let matrix = DecisionMatrix {
        alternatives,
        criteria,
        scores,
    };
    let result = vikor(&matrix, &weights, v)?;
    Ok(RankingRun {
        judgment: judgment.clone(),
        weights,
        auto_scores,
        matrix,
        result,
    })
}

/// Delimited table: header `alternative,<criterion ids>`, one row per alternative.
pub fn matrix_to_csv(matrix: &DecisionMatrix) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["alternative".to_string()];
    header.extend(matrix.criteria.0.iter().map(|c| c.id.clone()));
    w.write_record(&header).expect("in-memory write");
    for (a, row) in matrix.alternatives.iter().zip(&matrix.scores) {
        let mut rec = vec![a.clone()];
        rec.extend(row.iter().map(|x| x.to_string()));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

/// Reads a table written by [`matrix_to_csv`]. Criterion ids are looked up
/// in `known`; columns keep the header order.
pub fn matrix_from_csv(text: &str, known: &CriteriaSet) -> Result<DecisionMatrix, DecisionError> {
    let csv_err = |e: csv::Error| DecisionError::Csv(e.to_string());
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?.clone();
    let criteria = CriteriaSet(
        header
            .iter()
            .skip(1)
            .map(|id| {
                known
                    .get(id)
                    .cloned()
                    .ok_or_else(|| DecisionError::UnknownCriterion(id.to_string()))
            })
            .collect::<Result<_, _>>()?,
    );
    let mut alternatives = Vec::new();
    let mut scores = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let mut cells = rec.iter();
        alternatives.push(cells.next().unwrap_or_default().to_string());
        let row = cells
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| DecisionError::Csv(format!("row {}: {c:?} is not a number", line + 2)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        scores.push(row);
    }
    let m = DecisionMatrix {
        alternatives,
        criteria,
        scores,
    };
    m.check()?;
    Ok(m)
}

/// Pretty JSON report of a ranking run.
pub fn report_json(run: &RankingRun) -> String {
    serde_json::to_string_pretty(run).expect("ranking run serializes")
}
