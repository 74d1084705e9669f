use std::collections::{BTreeMap, HashMap};

use super::{check_k, top_k};
use crate::error::Result;
use crate::model::{ScoredDoc, SparseVectorSet};

/// Impact index over precomputed term-weight vectors: term → (doc, weight).
#[derive(Debug, Clone)]
pub struct SparseIndex {
    doc_ids: Vec<String>,
    postings: HashMap<String, Vec<(u32, f64)>>,
}

impl SparseIndex {
    pub fn new(docs: &SparseVectorSet) -> Self {
        let mut postings: HashMap<String, Vec<(u32, f64)>> = HashMap::new();
        let mut doc_ids = Vec::with_capacity(docs.vectors.len());
        for (i, (id, vec)) in docs.vectors.iter().enumerate() {
            for (term, &w) in vec {
                postings
                    .entry(term.clone())
                    .or_default()
                    .push((i as u32, w));
            }
            doc_ids.push(id.clone());
        }
        Self { doc_ids, postings }
    }

    /// Dot-product top-k. Query terms are visited in ascending term order;
    /// documents sharing no term with the query are omitted.
    pub fn search(&self, query: &BTreeMap<String, f64>, k: usize) -> Result<Vec<ScoredDoc>> {
        check_k(k)?;
        let mut acc = vec![0.0f64; self.doc_ids.len()];
        let mut touched = vec![false; self.doc_ids.len()];
        for (term, &qw) in query {
            for &(d, dw) in self.postings.get(term).into_iter().flatten() {
                acc[d as usize] += qw * dw;
                touched[d as usize] = true;
            }
        }
        let scored = (0..self.doc_ids.len())
            .filter(|&d| touched[d])
            .map(|d| (self.doc_ids[d].as_str(), acc[d]))
            .collect();
        Ok(top_k(scored, k))
    }
}

/// One-off sparse search; builds a throwaway [`SparseIndex`].
pub fn sparse_search(
    docs: &SparseVectorSet,
    query: &BTreeMap<String, f64>,
    k: usize,
) -> Result<Vec<ScoredDoc>> {
    SparseIndex::new(docs).search(query, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[(&str, &[(&str, f64)])]) -> SparseVectorSet {
        SparseVectorSet {
            vectors: items
                .iter()
                .map(|(id, v)| {
                    (
                        id.to_string(),
                        v.iter().map(|(t, w)| (t.to_string(), *w)).collect(),
                    )
                })
                .collect(),
        }
    }

    fn q(v: &[(&str, f64)]) -> BTreeMap<String, f64> {
        v.iter().map(|(t, w)| (t.to_string(), *w)).collect()
    }

    #[test]
    fn dot_product() {
        let docs = set(&[("d", &[("cat", 1.5), ("dog", 9.0)])]);
        let hits = sparse_search(&docs, &q(&[("cat", 2.0)]), 10).unwrap();
        assert_eq!(hits, [ScoredDoc::new("d", 3.0)]);
    }

    #[test]
    fn disjoint_docs_are_omitted_and_ties_use_doc_id() {
        let docs = set(&[
            ("b", &[("x", 1.0)]),
            ("a", &[("x", 1.0)]),
            ("c", &[("y", 5.0)]),
        ]);
        let hits = sparse_search(&docs, &q(&[("x", 1.0)]), 10).unwrap();
        assert_eq!(
            hits.iter().map(|d| d.doc_id.as_str()).collect::<Vec<_>>(),
            ["a", "b"]
        );
        assert!(sparse_search(&docs, &q(&[("x", 1.0)]), 0).is_err());
    }
}
