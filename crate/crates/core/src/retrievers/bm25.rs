use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{analyze, check_k, top_k};
use crate::error::{Error, Result};
use crate::model::{read_text, write_text, Corpus, ScoredDoc};

const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 0.9, b: 0.4 }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self> {
        if !(k1 > 0.0 && k1.is_finite()) {
            return Err(Error::InvalidArgument(format!("k1 must be > 0, got {k1}")));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::InvalidArgument(format!(
                "b must be in [0, 1], got {b}"
            )));
        }
        Ok(Self { k1, b })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    /// Index into the sorted doc id table.
    pub doc: u32,
    pub tf: u32,
}

/// Term → postings sorted by doc id, with per-document token counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    doc_ids: Vec<String>,
    doc_lengths: Vec<u32>,
    avg_doc_len: f64,
    postings: BTreeMap<String, Vec<Posting>>,
}

/// Indexes title and body (concatenated) of every document.
pub fn build_index(corpus: &Corpus) -> Result<InvertedIndex> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot index an empty corpus".into(),
        ));
    }
    let mut doc_ids = Vec::with_capacity(corpus.len());
    let mut doc_lengths = Vec::with_capacity(corpus.len());
    let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
    // BTreeMap iteration is doc-id ascending, so postings come out sorted.
    for (i, (id, doc)) in corpus.docs.iter().enumerate() {
        let tokens = analyze(&format!("{} {}", doc.title, doc.text));
        let mut tfs: HashMap<String, u32> = HashMap::new();
        for t in &tokens {
            *tfs.entry(t.clone()).or_insert(0) += 1;
        }
        for (term, tf) in tfs {
            postings
                .entry(term)
                .or_default()
                .push(Posting { doc: i as u32, tf });
        }
        doc_ids.push(id.clone());
        doc_lengths.push(tokens.len() as u32);
    }
    let total: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
    Ok(InvertedIndex {
        avg_doc_len: total as f64 / doc_ids.len() as f64,
        doc_ids,
        doc_lengths,
        postings,
    })
}

impl InvertedIndex {
    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn doc_length(&self, doc_id: &str) -> Option<u32> {
        let i = self
            .doc_ids
            .binary_search_by(|d| d.as_str().cmp(doc_id))
            .ok()?;
        Some(self.doc_lengths[i])
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// `(doc_id, tf)` pairs for `term`, doc id ascending.
    pub fn postings(&self, term: &str) -> impl Iterator<Item = (&str, u32)> {
        self.postings
            .get(term)
            .into_iter()
            .flatten()
            .map(|p| (self.doc_ids[p.doc as usize].as_str(), p.tf))
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    /// ln(1 + (N - df + 0.5) / (df + 0.5))
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.num_docs() as f64;
        let df = self.doc_freq(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let path = dir.as_ref().join(INDEX_FILE);
        write_text(&path, &serde_json::to_string(self)?)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(INDEX_FILE);
        let index: InvertedIndex = serde_json::from_str(&read_text(&path)?)?;
        if index.doc_ids.len() != index.doc_lengths.len() {
            return Err(Error::InvalidData(format!(
                "{}: inconsistent doc tables",
                path.display()
            )));
        }
        Ok(index)
    }
}

/// BM25 top-k for a free-text query. Repeated query terms count once per
/// occurrence.
pub fn bm25_search(
    index: &InvertedIndex,
    query: &str,
    params: Bm25Params,
    k: usize,
) -> Result<Vec<ScoredDoc>> {
    check_k(k)?;
    let mut acc = vec![0.0f64; index.num_docs()];
    let mut touched = vec![false; index.num_docs()];
    for term in analyze(query) {
        let Some(list) = index.postings.get(&term) else {
            continue;
        };
        let idf = index.idf(&term);
        for p in list {
            let d = p.doc as usize;
            let tf = p.tf as f64;
            let norm = 1.0 - params.b + params.b * index.doc_lengths[d] as f64 / index.avg_doc_len;
            acc[d] += idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm);
            touched[d] = true;
        }
    }
    let scored = (0..index.num_docs())
        .filter(|&d| touched[d])
        .map(|d| (index.doc_ids[d].as_str(), acc[d]))
        .collect();
    Ok(top_k(scored, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Document;

    fn corpus(docs: &[(&str, &str)]) -> Corpus {
        Corpus {
            docs: docs
                .iter()
                .map(|(id, t)| {
                    (
                        id.to_string(),
                        Document {
                            title: String::new(),
                            text: t.to_string(),
                        },
                    )
                })
                .collect(),
        }
    }

    #[test]
    fn postings_and_lengths() {
        let idx = build_index(&corpus(&[("d1", "A b"), ("d2", "a")])).unwrap();
        assert_eq!(
            idx.postings("a").collect::<Vec<_>>(),
            [("d1", 1), ("d2", 1)]
        );
        assert_eq!(idx.postings("b").collect::<Vec<_>>(), [("d1", 1)]);
        assert_eq!(idx.avg_doc_len(), 1.5);
    }

    #[test]
    fn empty_doc_and_repeated_terms() {
        let idx = build_index(&corpus(&[("e", ""), ("r", "a a a")])).unwrap();
        assert_eq!(idx.doc_length("e"), Some(0));
        assert_eq!(idx.postings("a").collect::<Vec<_>>(), [("r", 3)]);
        assert!(build_index(&Corpus::default()).is_err());
    }

    #[test]
    fn single_matching_doc_ranks_first() {
        let idx = build_index(&corpus(&[("d1", "x y"), ("d2", "z"), ("d3", "y")])).unwrap();
        let hits = bm25_search(&idx, "z", Bm25Params::default(), 10).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].doc_id, "d2");
    }

    #[test]
    fn unseen_terms_and_bad_k() {
        let idx = build_index(&corpus(&[("d1", "x")])).unwrap();
        assert!(bm25_search(&idx, "nothing here", Bm25Params::default(), 5)
            .unwrap()
            .is_empty());
        assert!(bm25_search(&idx, "x", Bm25Params::default(), 0).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(Bm25Params::new(0.0, 0.4).is_err());
        assert!(Bm25Params::new(0.9, 1.5).is_err());
        assert!(Bm25Params::new(1.2, 0.75).is_ok());
    }

    #[test]
    fn save_load_round_trip() {
        let idx = build_index(&corpus(&[("d1", "A b"), ("d2", "a")])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        idx.save(dir.path()).unwrap();
        assert_eq!(InvertedIndex::load(dir.path()).unwrap(), idx);
    }
}
