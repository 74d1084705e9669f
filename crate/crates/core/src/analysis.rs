//! Judgment-coverage analysis: Judged@k profiles next to effectiveness,
//! extraction of unjudged top-ranked documents, presence of those documents
//! in a reference run, and export of an annotation pool for manual review.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{evaluate, Gain, Metric, MetricKind};
use crate::model::{write_text, Corpus, Qrels, QuerySet, Run};

/// Characters of body text kept in annotation exports.
pub const SNIPPET_CHARS: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub run: String,
    pub n_queries: usize,
    pub judged: f64,
    pub ndcg: f64,
    /// `(cutoff, recall)` pairs.
    pub recall: Vec<(usize, f64)>,
}

/// Mean Judged@k beside nDCG@k and Recall at each cutoff, one row per run.
pub fn judged_profile(
    runs: &BTreeMap<String, Run>,
    qrels: &Qrels,
    k: usize,
    recall_cutoffs: &[usize],
) -> Result<Vec<ProfileRow>> {
    let judged = Metric::new(MetricKind::Judged, k)?;
    let ndcg = Metric::new(MetricKind::Ndcg, k)?;
    let mut metrics = vec![judged, ndcg];
    for &c in recall_cutoffs {
        metrics.push(Metric::new(MetricKind::Recall, c)?);
    }
    runs.iter()
        .map(|(name, run)| {
            let report = evaluate(run, qrels, &metrics, Gain::Linear)?;
            Ok(ProfileRow {
                run: name.clone(),
                n_queries: report.n_queries_evaluated[&judged.to_string()],
                judged: report.value(judged).unwrap_or(0.0),
                ndcg: report.value(ndcg).unwrap_or(0.0),
                recall: recall_cutoffs
                    .iter()
                    .map(|&c| (c, report.value(Metric::recall(c)).unwrap_or(0.0)))
                    .collect(),
            })
        })
        .collect()
}

pub fn profile_tsv(rows: &[ProfileRow], k: usize) -> String {
    let mut out = format!("run\tqueries\tjudged@{k}\tndcg@{k}");
    if let Some(first) = rows.first() {
        for (c, _) in &first.recall {
            write!(out, "\trecall@{c}").unwrap();
        }
    }
    out.push('\n');
    for r in rows {
        write!(
            out,
            "{}\t{}\t{:.4}\t{:.4}",
            r.run, r.n_queries, r.judged, r.ndcg
        )
        .unwrap();
        for (_, v) in &r.recall {
            write!(out, "\t{v:.4}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TopOneClass {
    Positive,
    KnownNegative,
    Unjudged,
}

/// Where an unjudged document sits in the reference run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum Presence {
    Present { rank: usize },
    Absent,
    QueryAbsent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnjudgedDoc {
    pub doc_id: String,
    pub rank: usize,
    pub score: f64,
    pub presence: Option<Presence>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryUnjudged {
    pub query_id: String,
    pub top1: TopOneClass,
    pub docs: Vec<UnjudgedDoc>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TopOneCounts {
    pub positive: usize,
    pub known_negative: usize,
    pub unjudged: usize,
}

impl TopOneCounts {
    pub fn total(&self) -> usize {
        self.positive + self.known_negative + self.unjudged
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnjudgedReport {
    pub n_top: usize,
    /// Reference depth used by [`cross_run_presence`], if applied.
    pub reference_depth: Option<usize>,
    pub counts: TopOneCounts,
    /// Queries with at least one unjudged document in the top `n_top`.
    pub queries: Vec<QueryUnjudged>,
}

/// Lists the unjudged documents among each query's top `n_top` and
/// classifies every judged query's top-1 document. Queries are those the run
/// retrieves for and the qrels judge.
pub fn extract_unjudged_top(run: &Run, qrels: &Qrels, n_top: usize) -> Result<UnjudgedReport> {
    if n_top < 1 {
        return Err(Error::InvalidArgument("n_top must be >= 1".into()));
    }
    let mut counts = TopOneCounts::default();
    let mut queries = Vec::new();
    for (qid, docs) in run.iter() {
        let Some(judgments) = qrels.query(qid) else {
            continue;
        };
        let top1 = match judgments.get(&docs[0].doc_id) {
            Some(&g) if g > 0 => TopOneClass::Positive,
            Some(_) => TopOneClass::KnownNegative,
            None => TopOneClass::Unjudged,
        };
        match top1 {
            TopOneClass::Positive => counts.positive += 1,
            TopOneClass::KnownNegative => counts.known_negative += 1,
            TopOneClass::Unjudged => counts.unjudged += 1,
        }
        let unjudged: Vec<UnjudgedDoc> = docs
            .iter()
            .take(n_top)
            .enumerate()
            .filter(|(_, d)| !judgments.contains_key(&d.doc_id))
            .map(|(i, d)| UnjudgedDoc {
                doc_id: d.doc_id.clone(),
                rank: i + 1,
                score: d.score,
                presence: None,
            })
            .collect();
        if !unjudged.is_empty() {
            queries.push(QueryUnjudged {
                query_id: qid.to_string(),
                top1,
                docs: unjudged,
            });
        }
    }
    Ok(UnjudgedReport {
        n_top,
        reference_depth: None,
        counts,
        queries,
    })
}

/// Flags each listed document as present in (with rank), or absent from, the
/// reference run's top `depth`. Pass `usize::MAX` for the full list.
pub fn cross_run_presence(
    report: &UnjudgedReport,
    reference: &Run,
    depth: usize,
) -> Result<UnjudgedReport> {
    if depth < 1 {
        return Err(Error::InvalidArgument(
            "reference depth must be >= 1".into(),
        ));
    }
    let mut out = report.clone();
    out.reference_depth = Some(depth);
    for q in &mut out.queries {
        let reference_docs = reference.query(&q.query_id);
        for d in &mut q.docs {
            d.presence = Some(match reference_docs {
                None => Presence::QueryAbsent,
                Some(list) => match list.iter().take(depth).position(|r| r.doc_id == d.doc_id) {
                    Some(i) => Presence::Present { rank: i + 1 },
                    None => Presence::Absent,
                },
            });
        }
    }
    Ok(out)
}

fn clean(text: &str) -> String {
    text.chars()
        .map(|c| {
            if c == '\t' || c == '\n' || c == '\r' {
                ' '
            } else {
                c
            }
        })
        .collect()
}

fn presence_label(p: &Option<Presence>) -> String {
    match p {
        None => String::new(),
        Some(Presence::Present { rank }) => format!("present@{rank}"),
        Some(Presence::Absent) => "absent".into(),
        Some(Presence::QueryAbsent) => "query_absent".into(),
    }
}

/// Renders the pool as TSV: one row per listed document with the query text,
/// title and the first [`SNIPPET_CHARS`] characters of the body, plus an
/// empty label column.
pub fn annotation_pool_tsv(
    report: &UnjudgedReport,
    corpus: &Corpus,
    queries: Option<&QuerySet>,
) -> String {
    let mut out =
        String::from("query_id\tquery\tdoc_id\trank\tscore\treference\ttitle\tsnippet\tlabel\n");
    for q in &report.queries {
        let qtext = queries.and_then(|qs| qs.get(&q.query_id)).unwrap_or("");
        for d in &q.docs {
            let (title, snippet) = match corpus.get(&d.doc_id) {
                Some(doc) => (
                    clean(&doc.title),
                    clean(&doc.text.chars().take(SNIPPET_CHARS).collect::<String>()),
                ),
                None => {
                    log::warn!(
                        "doc {} not found in corpus; exported with empty text",
                        d.doc_id
                    );
                    (String::new(), String::new())
                }
            };
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{:.6}\t{}\t{}\t{}\t",
                q.query_id,
                clean(qtext),
                d.doc_id,
                d.rank,
                d.score,
                presence_label(&d.presence),
                title,
                snippet
            )
            .unwrap();
        }
    }
    out
}

pub fn export_annotation_pool(
    report: &UnjudgedReport,
    corpus: &Corpus,
    queries: Option<&QuerySet>,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_text(path.as_ref(), &annotation_pool_tsv(report, corpus, queries))
}
