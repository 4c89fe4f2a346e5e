use serde::{Deserialize, Serialize};

use super::{DecisionError, DecisionMatrix, Direction, Weights};

/// Slack for the acceptance conditions, so exact ties survive rounding.
const COND_EPS: f64 = 1e-12;

/// S or R spreads this small are rounding noise and count as degenerate.
const SPREAD_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternativeScore {
    pub id: String,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "Q")]
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conditions {
    pub acceptable_advantage: bool,
    pub acceptable_stability: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code")]
pub enum VikorWarning {
    /// Best and worst value coincide; the criterion contributes nothing.
    #[serde(rename = "DEGENERATE_CRITERION")]
    DegenerateCriterion { criterion: String },
    /// S or R is the same for every alternative; that half of Q is zero.
    #[serde(rename = "DEGENERATE_INDEX")]
    DegenerateIndex { index: String },
    #[serde(rename = "SINGLE_ALTERNATIVE")]
    SingleAlternative,
}

impl VikorWarning {
    pub fn code(&self) -> &'static str {
        match self {
            VikorWarning::DegenerateCriterion { .. } => "DEGENERATE_CRITERION",
            VikorWarning::DegenerateIndex { .. } => "DEGENERATE_INDEX",
            VikorWarning::SingleAlternative => "SINGLE_ALTERNATIVE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VikorResult {
    /// In matrix row order.
    pub alternatives: Vec<AlternativeScore>,
    pub v: f64,
    /// Per-criterion ideal `f*` and anti-ideal `f⁻`, in matrix column order.
    pub ideal: Vec<f64>,
    pub anti_ideal: Vec<f64>,
    /// Ids by ascending Q.
    pub ranking: Vec<String>,
    pub dq: Option<f64>,
    pub compromise_set: Vec<String>,
    /// None when there is a single alternative.
    pub conditions: Option<Conditions>,
    pub warnings: Vec<VikorWarning>,
}

impl VikorResult {
    pub fn score(&self, id: &str) -> Option<&AlternativeScore> {
        self.alternatives.iter().find(|a| a.id == id)
    }

    /// Row indices in ranking order.
    pub fn order(&self) -> Vec<usize> {
        self.ranking
            .iter()
            .map(|id| self.alternatives.iter().position(|a| &a.id == id).unwrap())
            .collect()
    }
}

/// VIKOR compromise ranking with strategy weight `v`.
pub fn vikor(matrix: &DecisionMatrix, weights: &Weights, v: f64) -> Result<VikorResult, DecisionError> {
    matrix.check()?;
    if !(0.0..=1.0).contains(&v) {
        return Err(DecisionError::BadV(v));
    }
    let w: Vec<f64> = matrix
        .criteria
        .0
        .iter()
        .map(|c| weights.get(&c.id).ok_or_else(|| DecisionError::MissingWeight(c.id.clone())))
        .collect::<Result<_, _>>()?;

    let n = matrix.alternatives.len();
    let mut warnings = Vec::new();
    let mut ideal = Vec::with_capacity(w.len());
    let mut anti = Vec::with_capacity(w.len());
    for (j, c) in matrix.criteria.0.iter().enumerate() {
        let col = matrix.scores.iter().map(|row| row[j]);
        let hi = col.clone().fold(f64::NEG_INFINITY, f64::max);
        let lo = col.fold(f64::INFINITY, f64::min);
        let (best, worst) = match c.direction {
            Direction::Benefit => (hi, lo),
            Direction::Cost => (lo, hi),
        };
        ideal.push(best);
        anti.push(worst);
        if best == worst && n > 1 {
            warnings.push(VikorWarning::DegenerateCriterion {
                criterion: c.id.clone(),
            });
        }
    }

    if n == 1 {
        let id = matrix.alternatives[0].clone();
        return Ok(VikorResult {
            alternatives: vec![AlternativeScore {
                id: id.clone(),
                s: 0.0,
                r: 0.0,
                q: 0.0,
            }],
            v,
            ideal,
            anti_ideal: anti,
            ranking: vec![id.clone()],
            dq: None,
            compromise_set: vec![id],
            conditions: None,
            warnings: vec![VikorWarning::SingleAlternative],
        });
    }
    if warnings.len() == w.len() {
        return Err(DecisionError::NoDiscrimination);
    }

    let mut scores: Vec<AlternativeScore> = matrix
        .alternatives
        .iter()
        .zip(&matrix.scores)
        .map(|(id, row)| {
            let (mut s, mut r) = (0.0, 0.0);
            for j in 0..w.len() {
                let term = if ideal[j] == anti[j] {
                    0.0
                } else {
                    w[j] * (ideal[j] - row[j]) / (ideal[j] - anti[j])
                };
                s += term;
                r = f64::max(r, term);
            }
            AlternativeScore { id: id.clone(), s, r, q: 0.0 }
        })
        .collect();
    let (s_best, s_worst) = bounds(scores.iter().map(|a| a.s));
    let (r_best, r_worst) = bounds(scores.iter().map(|a| a.r));
    for (name, best, worst) in [("S", s_best, s_worst), ("R", r_best, r_worst)] {
        if worst - best <= SPREAD_EPS {
            warnings.push(VikorWarning::DegenerateIndex { index: name.into() });
        }
    }
    let part = |x: f64, best: f64, worst: f64| {
        if worst - best <= SPREAD_EPS {
            0.0
        } else {
            (x - best) / (worst - best)
        }
    };
    for a in &mut scores {
        a.q = v * part(a.s, s_best, s_worst) + (1.0 - v) * part(a.r, r_best, r_worst);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&scores[a], &scores[b]);
        x.q.total_cmp(&y.q)
            .then(x.s.total_cmp(&y.s))
            .then(x.r.total_cmp(&y.r))
            .then_with(|| x.id.cmp(&y.id))
    });

    let dq = 1.0 / (n as f64 - 1.0);
    let first = order[0];
    let second = order[1];
    let conditions = Conditions {
        acceptable_advantage: scores[second].q - scores[first].q >= dq - COND_EPS,
        acceptable_stability: scores[first].s <= s_best + COND_EPS || scores[first].r <= r_best + COND_EPS,
    };
    let compromise = match (conditions.acceptable_advantage, conditions.acceptable_stability) {
        (true, true) => 1,
        (true, false) => 2,
        (false, _) => order
            .iter()
            .take_while(|&&i| i == first || scores[i].q - scores[first].q < dq - COND_EPS)
            .count(),
    };

    let ids = |idx: &[usize]| idx.iter().map(|&i| scores[i].id.clone()).collect();
    Ok(VikorResult {
        ranking: ids(&order),
        compromise_set: ids(&order[..compromise]),
        alternatives: scores,
        v,
        ideal,
        anti_ideal: anti,
        dq: Some(dq),
        conditions: Some(conditions),
        warnings,
    })
}

fn bounds(x: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let lo = x.clone().fold(f64::INFINITY, f64::min);
    let hi = x.fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::{CriteriaSet, Criterion, Scoring};

    fn matrix(rows: &[&[f64]]) -> DecisionMatrix {
        let m = rows[0].len();
        DecisionMatrix {
            alternatives: (0..rows.len()).map(|i| format!("a{}", i + 1)).collect(),
            criteria: CriteriaSet(
                (0..m)
                    .map(|j| Criterion::benefit(&format!("c{j}"), "", Scoring::Manual))
                    .collect(),
            ),
            scores: rows.iter().map(|r| r.to_vec()).collect(),
        }
    }

    fn equal(m: usize) -> Weights {
        let ids: Vec<String> = (0..m).map(|j| format!("c{j}")).collect();
        Weights::equal(&ids.iter().map(String::as_str).collect::<Vec<_>>())
    }

    #[test]
    fn dominating_alternative_is_ideal() {
        let r = vikor(&matrix(&[&[0.2, 0.4], &[0.9, 0.8], &[0.5, 0.1]]), &equal(2), 0.5).unwrap();
        let best = r.score("a2").unwrap();
        assert_eq!((best.s, best.r, best.q), (0.0, 0.0, 0.0));
        assert_eq!(r.ranking[0], "a2");
    }

    #[test]
    fn symmetric_pair_ties_by_id() {
        let r = vikor(&matrix(&[&[0.0, 1.0], &[1.0, 0.0]]), &equal(2), 0.5).unwrap();
        assert_eq!(r.ranking, ["a1", "a2"]);
        assert!(r.alternatives.iter().all(|a| a.q == 0.0 && a.s == 0.5 && a.r == 0.5));
        assert!(r.warnings.iter().any(|w| w.code() == "DEGENERATE_INDEX"));
        assert_eq!(r.compromise_set, ["a1", "a2"]);
    }

    #[test]
    fn degenerate_criterion_is_a_warning() {
        let r = vikor(&matrix(&[&[0.5, 1.0], &[0.5, 0.0]]), &equal(2), 0.5).unwrap();
        assert_eq!(
            r.warnings[0],
            VikorWarning::DegenerateCriterion {
                criterion: "c0".into()
            }
        );
        assert_eq!(r.ranking, ["a1", "a2"]);
        let e = vikor(&matrix(&[&[0.5, 1.0], &[0.5, 1.0]]), &equal(2), 0.5).unwrap_err();
        assert_eq!(e.code(), "NO_DISCRIMINATION");
    }

    #[test]
    fn single_alternative() {
        let r = vikor(&matrix(&[&[0.3, 0.7]]), &equal(2), 0.5).unwrap();
        assert_eq!(r.ranking, ["a1"]);
        assert_eq!(r.compromise_set, ["a1"]);
        assert!(r.conditions.is_none());
        assert_eq!(r.warnings, [VikorWarning::SingleAlternative]);
    }

    #[test]
    fn stability_failure_keeps_two() {
        // a1 leads on Q by more than DQ = 0.25 but is neither best on S
        // (a2, a3) nor best on R (a4).
        let m = matrix(&[
            &[0.25, 0.75, 0.75],
            &[0.0, 0.75, 1.0],
            &[1.0, 0.75, 0.25],
            &[0.5, 0.25, 0.75],
            &[1.0, 0.0, 0.75],
        ]);
        let r = vikor(&m, &equal(3), 0.5).unwrap();
        let c = r.conditions.unwrap();
        assert!(c.acceptable_advantage);
        assert!(!c.acceptable_stability);
        assert_eq!(r.compromise_set, ["a1", "a2"]);
    }

    #[test]
    fn advantage_failure_extends_set() {
        let m = matrix(&[&[1.0, 0.0], &[0.9, 0.2], &[0.0, 1.0], &[0.1, 0.1]]);
        let r = vikor(&m, &equal(2), 1.0).unwrap();
        let q1 = r.score(&r.ranking[0]).unwrap().q;
        let dq = r.dq.unwrap();
        assert!(!r.conditions.unwrap().acceptable_advantage);
        for id in &r.ranking {
            let inside = r.compromise_set.contains(id);
            assert_eq!(inside, r.score(id).unwrap().q - q1 < dq, "{id}");
        }
    }

    #[test]
    fn cost_criteria_are_flipped() {
        let mut m = matrix(&[&[1.0], &[3.0]]);
        m.criteria.0[0].direction = Direction::Cost;
        let r = vikor(&m, &equal(1), 0.5).unwrap();
        assert_eq!(r.ranking, ["a1", "a2"]);
        assert_eq!(r.ideal, [1.0]);
    }

    #[test]
    fn input_errors() {
        let m = matrix(&[&[1.0], &[0.0]]);
        assert_eq!(vikor(&m, &equal(1), 1.5).unwrap_err().code(), "BAD_V");
        assert_eq!(vikor(&m, &Weights::equal(&["x"]), 0.5).unwrap_err().code(), "MISSING_WEIGHT");
        let mut ragged = m.clone();
        ragged.scores[1].push(2.0);
        assert_eq!(vikor(&ragged, &equal(1), 0.5).unwrap_err().code(), "BAD_MATRIX");
    }
}
