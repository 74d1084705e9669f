use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{check_k, top_k};
use crate::error::{Error, Result};
use crate::model::{DenseVectorSet, MultiVectorSet, ScoredDoc};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    #[default]
    Dot,
    Cosine,
}

impl FromStr for Similarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(Similarity::Dot),
            "cosine" | "cos" => Ok(Similarity::Cosine),
            _ => Err(Error::InvalidArgument(format!("unknown similarity `{s}`"))),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_dim(expected: usize, found: usize, context: &str) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            expected,
            found,
            context: context.to_string(),
        });
    }
    Ok(())
}

/// Exhaustive exact search. Cosine against a zero vector scores 0.
pub fn dense_search(
    docs: &DenseVectorSet,
    query: &[f64],
    k: usize,
    similarity: Similarity,
) -> Result<Vec<ScoredDoc>> {
    check_k(k)?;
    check_dim(docs.dim, query.len(), "dense query")?;
    let qn = norm(query);
    let scored = docs
        .vectors
        .iter()
        .map(|(id, v)| {
            let s = match similarity {
                Similarity::Dot => dot(query, v),
                Similarity::Cosine => {
                    let denom = qn * norm(v);
                    if denom > 0.0 {
                        dot(query, v) / denom
                    } else {
                        0.0
                    }
                }
            };
            (id.as_str(), s)
        })
        .collect();
    Ok(top_k(scored, k))
}

/// Late-interaction search: each query token takes its best dot product over
/// the document's tokens, and those maxima are summed. A document without
/// tokens scores 0.
pub fn maxsim_search(
    docs: &MultiVectorSet,
    query: &[Vec<f64>],
    k: usize,
) -> Result<Vec<ScoredDoc>> {
    check_k(k)?;
    if docs.dim > 0 {
        for tok in query {
            check_dim(docs.dim, tok.len(), "maxsim query token")?;
        }
    }
    let scored = docs
        .vectors
        .iter()
        .map(|(id, toks)| {
            let s: f64 = if toks.is_empty() {
                0.0
            } else {
                query
                    .iter()
                    .map(|q| {
                        toks.iter()
                            .map(|d| dot(q, d))
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .sum()
            };
            (id.as_str(), s)
        })
        .collect();
    Ok(top_k(scored, k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(items: &[(&str, &[f64])]) -> DenseVectorSet {
        DenseVectorSet {
            dim: items[0].1.len(),
            vectors: items
                .iter()
                .map(|(id, v)| (id.to_string(), v.to_vec()))
                .collect(),
        }
    }

    fn multi(items: &[(&str, &[&[f64]])]) -> MultiVectorSet {
        MultiVectorSet {
            dim: 2,
            vectors: items
                .iter()
                .map(|(id, toks)| (id.to_string(), toks.iter().map(|t| t.to_vec()).collect()))
                .collect(),
        }
    }

    #[test]
    fn dot_ranks_aligned_doc_first() {
        let docs = dense(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        let hits = dense_search(&docs, &[1.0, 0.0], 10, Similarity::Dot).unwrap();
        assert_eq!(hits, [ScoredDoc::new("a", 1.0), ScoredDoc::new("b", 0.0)]);
    }

    #[test]
    fn cosine_is_scale_invariant() {
        let docs = dense(&[("v", &[1.0, 2.0]), ("w", &[3.0, 6.0]), ("x", &[2.0, -1.0])]);
        let hits = dense_search(&docs, &[0.5, 0.7], 10, Similarity::Cosine).unwrap();
        assert!((hits[0].score - hits[1].score).abs() < 1e-12);
        assert_eq!(hits[2].doc_id, "x");
    }

    #[test]
    fn k_larger_than_corpus_and_dim_errors() {
        let docs = dense(&[("a", &[1.0, 0.0])]);
        assert_eq!(
            dense_search(&docs, &[1.0, 1.0], 50, Similarity::Dot)
                .unwrap()
                .len(),
            1
        );
        assert!(matches!(
            dense_search(&docs, &[1.0], 5, Similarity::Dot),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn maxsim_worked_example() {
        let docs = multi(&[("A", &[&[1.0, 0.0]]), ("B", &[&[1.0, 0.0], &[0.0, 1.0]])]);
        let q = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let hits = maxsim_search(&docs, &q, 10).unwrap();
        assert_eq!(hits, [ScoredDoc::new("B", 2.0), ScoredDoc::new("A", 1.0)]);
    }

    #[test]
    fn maxsim_single_token_is_dot_and_duplicates_are_idempotent() {
        let docs = multi(&[
            ("A", &[&[0.3, -2.0]]),
            ("A2", &[&[0.3, -2.0], &[0.3, -2.0]]),
        ]);
        let hits = maxsim_search(&docs, &[vec![1.5, 0.25]], 10).unwrap();
        let expected = 0.3 * 1.5 + -2.0 * 0.25;
        assert!(hits.iter().all(|h| h.score == expected));
    }

    #[test]
    fn maxsim_empty_doc_scores_zero() {
        let docs = multi(&[("E", &[]), ("N", &[&[-1.0, -1.0]])]);
        let hits = maxsim_search(&docs, &[vec![1.0, 1.0]], 10).unwrap();
        assert_eq!(hits, [ScoredDoc::new("E", 0.0), ScoredDoc::new("N", -2.0)]);
        assert!(maxsim_search(&docs, &[vec![1.0, 1.0, 1.0]], 10).is_err());
    }
}
