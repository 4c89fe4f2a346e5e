//! One PASS/FAIL line per acceptance criterion. Exits nonzero on any failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use bioinvert_core::corpus::{
    audit_size, build_review_batches, classify, generate_samples, LabelSource, LabeledSentence,
    LexiconClassifier, Scores, SentenceRecord,
};
use bioinvert_core::decision::{
    g1_weights, vikor, CriteriaSet, Criterion, DecisionMatrix, G1Judgment, Scoring, Weights,
};
use bioinvert_core::inversion::{invert, EngineeringKB};
use bioinvert_core::knowledge::{parse_frame, serialize_frame, validate_frame, Dimension};
use bioinvert_core::llm::{LlmClient, LlmParaphraser, MockBackend};
use bioinvert_workbench::{replay, ProjectDir};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn matrix(n: usize, m: usize) -> DecisionMatrix {
    DecisionMatrix {
        alternatives: (0..n).map(|i| format!("a{i}")).collect(),
        criteria: CriteriaSet(
            (0..m)
                .map(|j| Criterion::benefit(&format!("c{j}"), "", Scoring::Manual))
                .collect(),
        ),
        scores: vec![vec![0.0; m]; n],
    }
}

fn weights(w: &[f64]) -> Weights {
    let order: Vec<String> = (0..w.len()).map(|j| format!("c{j}")).collect();
    Weights {
        values: order.iter().cloned().zip(w.iter().copied()).collect(),
        order,
    }
}

/// Textbook S and R for benefit criteria, written out step by step.
/// Zero-range criteria contribute nothing. None when every criterion has zero range.
fn reference_sr(f: &[Vec<f64>], w: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = f.len();
    let m = w.len();
    let mut best = vec![f64::NEG_INFINITY; m];
    let mut worst = vec![f64::INFINITY; m];
    for row in f {
        for j in 0..m {
            best[j] = best[j].max(row[j]);
            worst[j] = worst[j].min(row[j]);
        }
    }
    if (0..m).all(|j| best[j] == worst[j]) {
        return None;
    }
    let mut s = vec![0.0; n];
    let mut r = vec![0.0; n];
    for i in 0..n {
        for j in 0..m {
            let d = if best[j] == worst[j] {
                0.0
            } else {
                w[j] * (best[j] - f[i][j]) / (best[j] - worst[j])
            };
            s[i] += d;
            if d > r[i] {
                r[i] = d;
            }
        }
    }
    Some((s, r))
}

/// Q from S and R. A zero S or R range drops that half.
fn reference_q(s: &[f64], r: &[f64], v: f64) -> Vec<f64> {
    let s_star = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let s_minus = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let r_star = r.iter().cloned().fold(f64::INFINITY, f64::min);
    let r_minus = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut q = vec![0.0; s.len()];
    for i in 0..s.len() {
        let a = if s_minus - s_star > 1e-12 { (s[i] - s_star) / (s_minus - s_star) } else { 0.0 };
        let b = if r_minus - r_star > 1e-12 { (r[i] - r_star) / (r_minus - r_star) } else { 0.0 };
        q[i] = v * a + (1.0 - v) * b;
    }
    q
}

/// Every matrix on the grid up to row order. VIKOR is row-permutation
/// equivariant, so multisets of rows cover the grid.
fn vikor_grid() -> Check {
    const LEVELS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
    let start = Instant::now();
    let mut checked = 0u64;
    let mut max_diff = 0.0f64;
    for m in 2..=3 {
        let w: &[f64] = if m == 2 { &[0.6, 0.4] } else { &[0.5, 0.3, 0.2] };
        let wt = weights(w);
        let rows: Vec<Vec<f64>> = (0..LEVELS.len().pow(m as u32))
            .map(|mut k| {
                (0..m)
                    .map(|_| {
                        let x = LEVELS[k % LEVELS.len()];
                        k /= LEVELS.len();
                        x
                    })
                    .collect()
            })
            .collect();
        for n in 2..=4 {
            let mut mx = matrix(n, m);
            let mut idx = vec![0usize; n];
            loop {
                for (i, &k) in idx.iter().enumerate() {
                    mx.scores[i].clone_from(&rows[k]);
                }
                let sr = reference_sr(&mx.scores, w);
                for v in [0.0, 0.5, 1.0] {
                    let got = vikor(&mx, &wt, v);
                    match (sr.as_ref().map(|(s, r)| reference_q(s, r, v)), got) {
                        (None, Err(e)) if e.code() == "NO_DISCRIMINATION" => {}
                        (Some(q), Ok(r)) => {
                            for (a, b) in q.iter().zip(&r.alternatives) {
                                max_diff = max_diff.max((a - b.q).abs());
                            }
                        }
                        (want, got) => {
                            return Err(format!("{:?} v={v}: reference {want:?}, got {got:?}", mx.scores))
                        }
                    }
                    checked += 1;
                }
                // Next nondecreasing index tuple.
                let mut p = n;
                while p > 0 && idx[p - 1] == rows.len() - 1 {
                    p -= 1;
                }
                if p == 0 {
                    break;
                }
                idx[p - 1] += 1;
                let x = idx[p - 1];
                for slot in &mut idx[p..] {
                    *slot = x;
                }
            }
        }
    }

    // Spot-check the equivariance that justifies the reduction.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let wt = weights(&[0.5, 0.3, 0.2]);
    for _ in 0..2000 {
        let mut mx = matrix(4, 3);
        for row in &mut mx.scores {
            for x in row.iter_mut() {
                *x = LEVELS[rng.gen_range(0..5)];
            }
        }
        let Ok(a) = vikor(&mx, &wt, 0.5) else { continue };
        let mut perm = mx.clone();
        perm.scores.reverse();
        let b = vikor(&perm, &wt, 0.5).map_err(|e| e.to_string())?;
        for (x, y) in a.alternatives.iter().zip(b.alternatives.iter().rev()) {
            ensure((x.q - y.q).abs() <= 1e-12, || format!("row permutation changed Q: {:?}", mx.scores))?;
        }
    }

    let elapsed = start.elapsed();
    ensure(max_diff <= 1e-12, || format!("max |dQ| = {max_diff:e}"))?;
    ensure(elapsed < Duration::from_secs(60), || format!("grid took {elapsed:?}"))?;
    Ok(format!("{checked} cases, max |dQ| = {max_diff:e}, {:.1}s", elapsed.as_secs_f64()))
}

fn vikor_worked_example() -> Check {
    let mut mx = matrix(3, 2);
    mx.scores = vec![vec![1.0, 1.0], vec![0.5, 0.5], vec![0.0, 0.0]];
    let r = vikor(&mx, &weights(&[0.5, 0.5]), 0.5).map_err(|e| e.to_string())?;
    let q: Vec<f64> = r.alternatives.iter().map(|a| a.q).collect();
    ensure(q == [0.0, 0.5, 1.0], || format!("Q = {q:?}"))?;
    ensure(r.dq == Some(0.5), || format!("DQ = {:?}", r.dq))?;
    ensure(r.compromise_set == ["a0"], || format!("compromise {:?}", r.compromise_set))?;
    Ok("Q = (0, 0.5, 1), DQ = 0.5, compromise {a0}".into())
}

fn g1_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..1000 {
        let m = rng.gen_range(2..=8);
        let ratios: Vec<f64> = (1..m).map(|_| rng.gen_range(1.0..=1.8)).collect();
        let j = G1Judgment {
            order: (0..m).map(|i| format!("c{i}")).collect(),
            ratios: ratios.clone(),
        };
        let w = g1_weights(&j).map_err(|e| format!("case {case}: {e}"))?.ordered();
        let sum: f64 = w.iter().sum();
        ensure((sum - 1.0).abs() <= 1e-9, || format!("case {case}: sum {sum}"))?;
        ensure(w.iter().all(|x| *x > 0.0), || format!("case {case}: {w:?}"))?;
        for k in 1..m {
            ensure(w[k - 1] >= w[k], || format!("case {case}: not monotone {w:?}"))?;
            let got = w[k - 1] / w[k];
            ensure((got - ratios[k - 1]).abs() <= 1e-12, || {
                format!("case {case}: ratio {k} is {got}, judged {}", ratios[k - 1])
            })?;
        }
    }
    Ok("1000 judgments".into())
}

fn example_frames() -> Check {
    let kb = EngineeringKB::from_json(&fixture("fixtures/kb-soft-robot.json")).map_err(|e| e.to_string())?;
    let client = Arc::new(LlmClient::new(MockBackend::bundled()));
    let mut names = Vec::new();
    for name in ["fin-swim", "jet-propulsion", "wave-crawl"] {
        let text = fixture(&format!("fixtures/frames/{name}.json"));
        let f = parse_frame(&text).map_err(|e| format!("{name}: {e}"))?;
        let report = validate_frame(&f);
        ensure(report.is_clean(), || format!("{name}: {:?}", report.violations))?;
        let again = parse_frame(&serialize_frame(&f)).map_err(|e| format!("{name}: {e}"))?;
        ensure(again == f, || format!("{name}: roundtrip changed the frame"))?;
        let r = invert(&f, &kb, &client).map_err(|e| format!("{name}: {e}"))?;
        ensure(r.engineering_frame.functions.len() == f.functions.len(), || {
            format!("{name}: {} functions became {}", f.functions.len(), r.engineering_frame.functions.len())
        })?;
        names.push(format!("{} ({} functions)", f.id, f.functions.len()));
    }
    Ok(names.join(", "))
}

fn corpus_arithmetic() -> Check {
    let dims = [Dimension::Function, Dimension::Behavior, Dimension::Characteristic, Dimension::Environment];
    let labeled: Vec<LabeledSentence> = (0..18_888)
        .map(|i| {
            let labels = vec![dims[i % 4]];
            LabeledSentence {
                sentence: SentenceRecord::standalone(format!("s{i:05}"), format!("Synthetic statement number {i}.")),
                scores: Scores::indicator(&labels),
                labels,
                label_source: LabelSource::Human,
                threshold: 0.5,
            }
        })
        .collect();
    let batches = build_review_batches(&labeled, 42);
    ensure(batches.len() == 189, || format!("{} batches", batches.len()))?;
    for (k, b) in batches.iter().enumerate() {
        let size = if k < 188 { 100 } else { 88 };
        ensure(b.items.len() == size, || format!("batch {} has {} items", b.batch_no, b.items.len()))?;
        ensure(b.audit_sample.len() == 3 && audit_size(size) == 3, || {
            format!("batch {} audits {}", b.batch_no, b.audit_sample.len())
        })?;
    }
    ensure(audit_size(1) == 1, || "one sentence must still be audited".into())?;
    ensure(build_review_batches(&labeled, 42) == batches, || "batches not reproducible".into())?;

    let para = LlmParaphraser(Arc::new(LlmClient::new(MockBackend::bundled())));
    let a = generate_samples(&labeled, 10_000, 0.8, 42, &para).map_err(|e| e.to_string())?;
    ensure(a.real.len() == 8000 && a.augmented.len() == 2000, || {
        format!("{}/{}", a.real.len(), a.augmented.len())
    })?;
    let b = generate_samples(&labeled, 10_000, 0.8, 42, &para).map_err(|e| e.to_string())?;
    ensure(serde_json::to_string(&a).unwrap() == serde_json::to_string(&b).unwrap(), || {
        "samples not reproducible".into()
    })?;
    Ok("189 batches (188x100 + 88, 3 audited each), samples 8000/2000".into())
}

fn pipeline_determinism() -> Check {
    let engine = engine();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let exports: Vec<String> = dirs
        .iter()
        .map(|d| run_all(&d.path().join("demo"), &engine, demo_workflow(7)).export().unwrap())
        .collect();
    ensure(exports[0] == exports[1], || "exports differ".into())?;
    let p = ProjectDir::new(dirs[0].path().join("demo"));
    let events = p.events().map_err(|e| e.to_string())?;
    let replayed = replay(&engine, &events).map_err(|e| e.to_string())?;
    let stored = p.load().map_err(|e| e.to_string())?;
    ensure(replayed == stored, || "replayed state differs from the snapshot".into())?;
    let ranking = stored.ranking.as_ref().map(|r| r.result.ranking.join(" < ")).unwrap_or_default();
    Ok(format!("{} events, {} export bytes, ranking {ranking}", events.len(), exports[0].len()))
}

#[derive(Deserialize)]
struct GoldenLabel {
    id: String,
    text: String,
    labels: Vec<Dimension>,
}

fn golden_classification() -> Check {
    let lexicon = LexiconClassifier::default();
    let gold: Vec<GoldenLabel> = fixture("fixtures/corpus/golden-labels.jsonl")
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let mut hits = 0;
    let mut misses = Vec::new();
    for g in &gold {
        let got = classify(&SentenceRecord::standalone(&g.id, &g.text), &lexicon, 0.5).map_err(|e| e.to_string())?;
        let mut want = g.labels.clone();
        want.sort();
        if got.labels == want {
            hits += 1;
        } else {
            misses.push(g.id.clone());
        }
    }
    ensure(misses.is_empty() && gold.len() == 30, || format!("{hits}/{} exact, missed {misses:?}", gold.len()))?;
    Ok(format!("{hits}/30 exact"))
}

fn dominance_and_scale() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut ran = 0;
    while ran < 10_000 {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(1..=5);
        let mut mx = matrix(n, m);
        for row in &mut mx.scores {
            for x in row.iter_mut() {
                *x = rng.gen_range(0.0..1.0);
            }
        }
        let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let wt = weights(&raw.iter().map(|x| x / total).collect::<Vec<_>>());
        let v = rng.gen_range(0.0..=1.0);

        // Row 0 weakly dominates row 1, strictly on one criterion.
        let strict = rng.gen_range(0..m);
        for j in 0..m {
            let hi = mx.scores[0][j].max(mx.scores[1][j]);
            mx.scores[0][j] = hi;
        }
        mx.scores[0][strict] = mx.scores[1][strict] + rng.gen_range(0.01..0.5);
        let r = vikor(&mx, &wt, v).map_err(|e| e.to_string())?;
        ensure(r.alternatives[0].q <= r.alternatives[1].q, || format!("dominated row ranked higher: {:?}", mx.scores))?;
        let pos = |id: &str| r.ranking.iter().position(|x| x == id).unwrap();
        ensure(pos("a0") < pos("a1"), || format!("dominance order broken: {:?}", mx.scores))?;

        // Positive affine rescaling of any column leaves Q unchanged.
        let j = rng.gen_range(0..m);
        let (a, b) = (rng.gen_range(0.01..100.0), rng.gen_range(-10.0..10.0));
        let mut scaled = mx.clone();
        for row in &mut scaled.scores {
            row[j] = a * row[j] + b;
        }
        let s = vikor(&scaled, &wt, v).map_err(|e| e.to_string())?;
        for (x, y) in r.alternatives.iter().zip(&s.alternatives) {
            ensure((x.q - y.q).abs() <= 1e-9, || format!("rescaling moved Q by {:e}", (x.q - y.q).abs()))?;
        }
        ran += 1;
    }
    Ok(format!("{ran} matrices"))
}

fn main() {
    let checks: [(&str, fn() -> Check); 8] = [
        ("vikor grid oracle", vikor_grid),
        ("vikor worked example", vikor_worked_example),
        ("g1 weight properties", g1_properties),
        ("example frames invert", example_frames),
        ("corpus arithmetic", corpus_arithmetic),
        ("pipeline determinism", pipeline_determinism),
        ("golden classification", golden_classification),
        ("vikor dominance and scale invariance", dominance_and_scale),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", 8 - failed, 8);
    if failed > 0 {
        std::process::exit(1);
    }
}
