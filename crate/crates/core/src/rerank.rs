//! Applying precomputed reranker scores to the head of a first-stage run,
//! and sweeping the rerank depth.
//!
//! Output scores are banded so reranked runs stay fusible with first-stage
//! runs: the reranked head lands in [1, 2] and the untouched tail in
//! [0, 0.99], so every head document outscores every tail document. When
//! some head documents have no reranker score, scored documents take
//! [1.5, 2] and the unscored ones [1, 1.495], ordered by first-stage score.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fusion::normalize_scores;
use crate::metrics::{evaluate_with, EvalReport, Gain, Metric};
use crate::model::{sort_ranked, Qrels, Run, ScoreFile, ScoredDoc};

pub const DEFAULT_DEPTHS: [usize; 3] = [10, 20, 100];

/// Top of the head band.
pub const HEAD_MAX: f64 = 2.0;
/// Bottom of the head band.
pub const HEAD_MIN: f64 = 1.0;
/// Scale applied to normalized tail scores.
pub const TAIL_SCALE: f64 = 0.99;
const SCORED_FLOOR: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RerankConfig {
    pub depth: usize,
    pub reranker: String,
}

impl RerankConfig {
    pub fn new(reranker: impl Into<String>, depth: usize) -> Result<Self> {
        if depth < 1 {
            return Err(Error::InvalidArgument("rerank depth must be >= 1".into()));
        }
        Ok(Self {
            depth,
            reranker: reranker.into(),
        })
    }

    pub fn apply(&self, first_stage: &Run, scores: &ScoreFile) -> Result<Run> {
        Ok(apply_reranker(first_stage, scores, self.depth)?
            .with_tag(format!("{}@{}", self.reranker, self.depth)))
    }
}

/// Maps `docs` (already in the desired order) into `[lo, hi]` by min-max of
/// `raw`.
fn band(docs: Vec<(&ScoredDoc, f64)>, lo: f64, hi: f64) -> Vec<ScoredDoc> {
    let mut tmp: Vec<ScoredDoc> = docs
        .iter()
        .map(|(d, raw)| ScoredDoc::new(d.doc_id.clone(), *raw))
        .collect();
    normalize_scores(&mut tmp);
    for d in &mut tmp {
        d.score = lo + (hi - lo) * d.score;
    }
    tmp
}

fn rerank_query(
    qid: &str,
    docs: &[ScoredDoc],
    scores: &ScoreFile,
    depth: usize,
) -> Result<Vec<ScoredDoc>> {
    let cut = docs.len().min(depth);
    let (head, tail) = docs.split_at(cut);
    let rr = scores.query(qid);
    let mut scored = Vec::new();
    let mut unscored = Vec::new();
    for d in head {
        match rr.and_then(|m| m.get(&d.doc_id)) {
            Some(&s) => scored.push((d, s)),
            None => unscored.push((d, d.score)),
        }
    }
    if scored.is_empty() {
        return Err(Error::MissingRerankScores {
            query: qid.to_string(),
            depth,
        });
    }
    let mut out = Vec::with_capacity(docs.len());
    if unscored.is_empty() {
        out.extend(band(scored, HEAD_MIN, HEAD_MAX));
    } else {
        out.extend(band(scored, SCORED_FLOOR, HEAD_MAX));
        out.extend(band(unscored, HEAD_MIN, SCORED_FLOOR - 0.005));
    }
    if !tail.is_empty() {
        out.extend(band(
            tail.iter().map(|d| (d, d.score)).collect(),
            0.0,
            TAIL_SCALE,
        ));
    }
    sort_ranked(&mut out);
    Ok(out)
}

/// Reorders each query's top `depth` documents by reranker score. Documents
/// beyond `depth` keep their first-stage order below the head.
pub fn apply_reranker(first_stage: &Run, scores: &ScoreFile, depth: usize) -> Result<Run> {
    apply_reranker_with(first_stage, scores, depth, Execution::default())
}

pub fn apply_reranker_with(
    first_stage: &Run,
    scores: &ScoreFile,
    depth: usize,
    exec: Execution,
) -> Result<Run> {
    if depth < 1 {
        return Err(Error::InvalidArgument("rerank depth must be >= 1".into()));
    }
    let queries: Vec<(&str, &[ScoredDoc])> = first_stage.iter().collect();
    let out = exec.map(&queries, |&(qid, docs)| {
        rerank_query(qid, docs, scores, depth).map(|d| (qid.to_string(), d))
    });
    let entries = out.into_iter().collect::<Result<BTreeMap<_, _>>>()?;
    Ok(
        Run::from_sorted(format!("{}.rr@{depth}", first_stage.tag()), entries)
            .with_language(first_stage.language().map(str::to_string)),
    )
}

#[derive(Debug, Clone)]
pub struct DepthSweep {
    pub best_depth: usize,
    pub run: Run,
    pub report: EvalReport,
    /// `(depth, metric value)` for every depth tried, ascending depth.
    pub values: Vec<(usize, f64)>,
}

/// Reranks at each depth, evaluates on `qrels`, and keeps the best depth
/// (ties go to the smallest).
pub fn sweep_depth(
    first_stage: &Run,
    scores: &ScoreFile,
    qrels: &Qrels,
    depths: &[usize],
    metric: Metric,
    gain: Gain,
) -> Result<DepthSweep> {
    sweep_depth_with(
        first_stage,
        scores,
        qrels,
        depths,
        metric,
        gain,
        Execution::default(),
    )
}

pub fn sweep_depth_with(
    first_stage: &Run,
    scores: &ScoreFile,
    qrels: &Qrels,
    depths: &[usize],
    metric: Metric,
    gain: Gain,
    exec: Execution,
) -> Result<DepthSweep> {
    let mut depths = depths.to_vec();
    depths.sort_unstable();
    depths.dedup();
    if depths.is_empty() {
        return Err(Error::InvalidArgument(
            "depth sweep needs at least one depth".into(),
        ));
    }
    let trials = exec.map(&depths, |&depth| -> Result<(usize, Run, EvalReport)> {
        let run = apply_reranker_with(first_stage, scores, depth, Execution::Sequential)?;
        let report = evaluate_with(&run, qrels, &[metric], gain, Execution::Sequential)?;
        Ok((depth, run, report))
    });
    let trials = trials.into_iter().collect::<Result<Vec<_>>>()?;
    let values: Vec<(usize, f64)> = trials
        .iter()
        .map(|(d, _, r)| (*d, r.value(metric).unwrap_or(0.0)))
        .collect();
    let mut best = 0;
    for i in 1..values.len() {
        if values[i].1 > values[best].1 {
            best = i;
        }
    }
    let (best_depth, run, report) = trials.into_iter().nth(best).expect("non-empty");
    Ok(DepthSweep {
        best_depth,
        run,
        report,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_qrels_str, parse_run_str, ParseOptions};

    fn run(text: &str) -> Run {
        parse_run_str(text, "mem", ParseOptions::default()).unwrap()
    }

    fn scores(pairs: &[(&str, &str, f64)]) -> ScoreFile {
        let mut s = ScoreFile::new();
        for (q, d, v) in pairs {
            s.insert(q, d, *v).unwrap();
        }
        s
    }

    fn ids(run: &Run, q: &str) -> Vec<String> {
        run.query(q)
            .unwrap()
            .iter()
            .map(|d| d.doc_id.clone())
            .collect()
    }

    #[test]
    fn worked_depth_two() {
        let fs = run("q Q0 d1 1 3 t\nq Q0 d2 2 2 t\nq Q0 d3 3 1 t\n");
        let out = apply_reranker(&fs, &scores(&[("q", "d1", 0.1), ("q", "d2", 0.9)]), 2).unwrap();
        assert_eq!(ids(&out, "q"), ["d2", "d1", "d3"]);
        let docs = out.query("q").unwrap();
        assert_eq!(docs[0].score, 2.0);
        assert_eq!(docs[1].score, 1.0);
        assert!(docs[2].score < 1.0);
    }

    #[test]
    fn identity_reranker_keeps_order() {
        let fs = run("q Q0 a 1 3 t\nq Q0 b 2 2 t\nq Q0 c 3 2 t\nq Q0 d 4 1 t\n");
        let rr = scores(&[
            ("q", "a", 3.0),
            ("q", "b", 2.0),
            ("q", "c", 2.0),
            ("q", "d", 1.0),
        ]);
        let out = apply_reranker(&fs, &rr, 10).unwrap();
        assert_eq!(ids(&out, "q"), ids(&fs, "q"));
    }

    #[test]
    fn unscored_head_docs_are_demoted_in_first_stage_order() {
        let fs = run("q Q0 a 1 9 t\nq Q0 b 2 8 t\nq Q0 c 3 7 t\nq Q0 z 4 1 t\n");
        let out = apply_reranker(&fs, &scores(&[("q", "c", 0.5)]), 3).unwrap();
        assert_eq!(ids(&out, "q"), ["c", "a", "b", "z"]);
        let docs = out.query("q").unwrap();
        assert!(docs[1].score >= 1.0 && docs[2].score >= 1.0);
        assert!(docs[3].score < 1.0);
    }

    #[test]
    fn missing_scores_error_names_query() {
        let fs = run("q7 Q0 a 1 9 t\n");
        let err = apply_reranker(&fs, &ScoreFile::new(), 10).unwrap_err();
        assert!(err.to_string().contains("q7"));
        assert!(apply_reranker(&fs, &scores(&[("q7", "a", 1.0)]), 0).is_err());
    }

    #[test]
    fn sweep_tie_goes_to_smallest_depth() {
        let fs = run("q Q0 a 1 9 t\nq Q0 b 2 8 t\n");
        let q = parse_qrels_str("q 0 a 1\n", "mem").unwrap();
        let rr = scores(&[("q", "a", 1.0), ("q", "b", 0.0)]);
        let s = sweep_depth(&fs, &rr, &q, &[100, 20, 10], Metric::ndcg(10), Gain::Linear).unwrap();
        assert_eq!(s.best_depth, 10);
        assert_eq!(s.values.len(), 3);
        assert!(sweep_depth(&fs, &rr, &q, &[], Metric::ndcg(10), Gain::Linear).is_err());
    }
}
