//! Domain types and readers/writers for every file format the toolkit
//! consumes or produces.

mod jsonl;
mod trec;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use jsonl::{
    parse_corpus, parse_dense_vectors, parse_multi_vectors, parse_queries, parse_sparse_vectors,
    write_corpus, write_dense_vectors, write_multi_vectors, write_queries, write_sparse_vectors,
};
pub use trec::{
    format_run, parse_qrels, parse_qrels_str, parse_run, parse_run_str, parse_scorefile,
    write_qrels, write_run, write_scorefile, ParseOptions,
};

/// A document and its score within one query's result list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

impl ScoredDoc {
    pub fn new(doc_id: impl Into<String>, score: f64) -> Self {
        Self {
            doc_id: doc_id.into(),
            score,
        }
    }
}

/// The ordering every ranked list in this crate uses: score descending,
/// then doc id ascending.
pub fn rank_order(a_score: f64, a_id: &str, b_score: f64, b_id: &str) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_id.cmp(b_id))
}

pub(crate) fn sort_ranked(docs: &mut [ScoredDoc]) {
    docs.sort_by(|a, b| rank_order(a.score, &a.doc_id, b.score, &b.doc_id));
}

/// One system's ranked, scored document lists per query.
///
/// Within a query doc ids are unique, every score is finite and entries are
/// kept sorted by [`rank_order`]. Queries with an empty list are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    tag: String,
    language: Option<String>,
    entries: BTreeMap<String, Vec<ScoredDoc>>,
}

impl Run {
    /// Validates and sorts `entries`.
    pub fn new(tag: impl Into<String>, entries: BTreeMap<String, Vec<ScoredDoc>>) -> Result<Self> {
        let mut checked = BTreeMap::new();
        for (qid, mut docs) in entries {
            if docs.is_empty() {
                continue;
            }
            let mut seen = std::collections::HashSet::with_capacity(docs.len());
            for d in &docs {
                if !d.score.is_finite() {
                    return Err(Error::InvalidData(format!(
                        "non-finite score for query {qid}, doc {}",
                        d.doc_id
                    )));
                }
                if !seen.insert(d.doc_id.as_str()) {
                    return Err(Error::InvalidData(format!(
                        "duplicate doc {} in query {qid}",
                        d.doc_id
                    )));
                }
            }
            sort_ranked(&mut docs);
            checked.insert(qid, docs);
        }
        Ok(Self {
            tag: tag.into(),
            language: None,
            entries: checked,
        })
    }

    /// Builds a run from per-query lists that are already valid and sorted.
    pub(crate) fn from_sorted(
        tag: impl Into<String>,
        entries: BTreeMap<String, Vec<ScoredDoc>>,
    ) -> Self {
        debug_assert!(entries
            .values()
            .all(|docs| docs.windows(2).all(|w| rank_order(
                w[0].score,
                &w[0].doc_id,
                w[1].score,
                &w[1].doc_id
            ) == Ordering::Less)));
        Self {
            tag: tag.into(),
            language: None,
            entries: entries.into_iter().filter(|(_, d)| !d.is_empty()).collect(),
        }
    }

    pub fn empty(tag: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            language: None,
            entries: BTreeMap::new(),
        }
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = tag.into();
        self
    }

    pub fn language(&self) -> Option<&str> {
        self.language.as_deref()
    }

    pub fn with_language(mut self, language: Option<String>) -> Self {
        self.language = language;
        self
    }

    pub fn query(&self, qid: &str) -> Option<&[ScoredDoc]> {
        self.entries.get(qid).map(Vec::as_slice)
    }

    /// Iterates queries in ascending query id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[ScoredDoc])> {
        self.entries.iter().map(|(q, d)| (q.as_str(), d.as_slice()))
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn contains_query(&self, qid: &str) -> bool {
        self.entries.contains_key(qid)
    }

    pub fn num_queries(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &BTreeMap<String, Vec<ScoredDoc>> {
        &self.entries
    }

    pub fn into_entries(self) -> BTreeMap<String, Vec<ScoredDoc>> {
        self.entries
    }

    /// Keeps the top `depth` documents of every query.
    pub fn truncated(&self, depth: usize) -> Run {
        Run {
            tag: self.tag.clone(),
            language: self.language.clone(),
            entries: self
                .entries
                .iter()
                .map(|(q, d)| (q.clone(), d[..d.len().min(depth)].to_vec()))
                .collect(),
        }
    }
}

/// Graded relevance judgments per (query, document).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
    language: Option<String>,
}

impl Qrels {
    pub fn new(judgments: BTreeMap<String, BTreeMap<String, u32>>) -> Self {
        Self {
            judgments: judgments
                .into_iter()
                .filter(|(_, j)| !j.is_empty())
                .collect(),
            language: None,
        }
    }

    /// Adds a judgment; re-adding the same grade is a no-op, a different
    /// grade is an error.
    pub fn insert(&mut self, qid: &str, doc_id: &str, grade: u32) -> Result<()> {
        let per_query = self.judgments.entry(qid.to_string()).or_default();
        match per_query.get(doc_id) {
            Some(&g) if g != grade => Err(Error::InvalidData(format!(
                "conflicting grades {g} and {grade} for query {qid}, doc {doc_id}"
            ))),
            Some(_) => Ok(()),
            None => {
                per_query.insert(doc_id.to_string(), grade);
                Ok(())
            }
        }
    }

    pub fn grade(&self, qid: &str, doc_id: &str) -> Option<u32> {
        self.judgments.get(qid)?.get(doc_id).copied()
    }

    pub fn query(&self, qid: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(qid)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeMap<String, u32>)> {
        self.judgments.iter().map(|(q, j)| (q.as_str(), j))
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn num_queries(&self) -> usize {
        self.judgments.len()
    }

    pub fn num_relevant(&self, qid: &str) -> usize {
        self.judgments
            .get(qid)
            .map_or(0, |j| j.values().filter(|&&g| g > 0).count())
    }

    pub fn language(&self) -> Option<&str> {
        self.language.as_deref()
    }

    pub fn with_language(mut self, language: Option<String>) -> Self {
        self.language = language;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub title: String,
    pub text: String,
}

/// Documents by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub docs: BTreeMap<String, Document>,
}

impl Corpus {
    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.docs.get(doc_id)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

/// Query texts by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuerySet {
    pub queries: BTreeMap<String, String>,
}

impl QuerySet {
    pub fn get(&self, qid: &str) -> Option<&str> {
        self.queries.get(qid).map(String::as_str)
    }
}

/// Precomputed term-weight vectors (all weights strictly positive).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVectorSet {
    pub vectors: BTreeMap<String, BTreeMap<String, f64>>,
}

/// Fixed-length dense vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVectorSet {
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

/// Per-token dense vectors for late interaction; every token shares `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiVectorSet {
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<Vec<f64>>>,
}

/// Precomputed reranker scores per (query, document).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreFile {
    scores: BTreeMap<String, HashMap<String, f64>>,
}

impl ScoreFile {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a score; duplicate pairs and non-finite values are errors.
    pub fn insert(&mut self, qid: &str, doc_id: &str, score: f64) -> Result<()> {
        if !score.is_finite() {
            return Err(Error::InvalidData(format!(
                "non-finite reranker score for query {qid}, doc {doc_id}"
            )));
        }
        let per_query = self.scores.entry(qid.to_string()).or_default();
        if per_query.insert(doc_id.to_string(), score).is_some() {
            return Err(Error::InvalidData(format!(
                "duplicate reranker score for query {qid}, doc {doc_id}"
            )));
        }
        Ok(())
    }

    pub fn get(&self, qid: &str, doc_id: &str) -> Option<f64> {
        self.scores.get(qid)?.get(doc_id).copied()
    }

    pub fn query(&self, qid: &str) -> Option<&HashMap<String, f64>> {
        self.scores.get(qid)
    }

    pub fn len(&self) -> usize {
        self.scores.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Iterates pairs in (query, doc) order.
    pub fn sorted_pairs(&self) -> Vec<(&str, &str, f64)> {
        let mut out = Vec::with_capacity(self.len());
        for (q, docs) in &self.scores {
            let mut ds: Vec<_> = docs.iter().collect();
            ds.sort_by(|a, b| a.0.cmp(b.0));
            out.extend(ds.into_iter().map(|(d, s)| (q.as_str(), d.as_str(), *s)));
        }
        out
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(raw)
        .map_err(|e| Error::parse(path, 0, format!("file is not valid UTF-8: {e}")))?;
    Ok(strip_bom(text))
}

pub(crate) fn strip_bom(text: String) -> String {
    match text.strip_prefix('\u{feff}') {
        Some(rest) => rest.to_string(),
        None => text,
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
