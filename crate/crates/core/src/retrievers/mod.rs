//! Exhaustive first-stage retrieval: BM25 over an inverted index, sparse
//! dot-product search, dense dot/cosine search and MaxSim late interaction.
//!
//! Every searcher returns at most `k` documents ordered by score descending
//! then doc id ascending, and [`run_from_queries`] turns per-query results
//! into a [`Run`].

mod analyzer;
mod bm25;
mod dense;
mod sparse;

use std::cmp::Ordering;
use std::collections::BTreeMap;

pub use analyzer::analyze;
pub use bm25::{bm25_search, build_index, Bm25Params, InvertedIndex};
pub use dense::{dense_search, maxsim_search, Similarity};
pub use sparse::{sparse_search, SparseIndex};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{rank_order, Run, ScoredDoc};

pub(crate) fn check_k(k: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::InvalidArgument(format!("k must be >= 1, got {k}")));
    }
    Ok(())
}

/// Keeps the `k` best `(doc_id, score)` pairs in rank order.
pub(crate) fn top_k(mut scored: Vec<(&str, f64)>, k: usize) -> Vec<ScoredDoc> {
    let cmp = |a: &(&str, f64), b: &(&str, f64)| -> Ordering { rank_order(a.1, a.0, b.1, b.0) };
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, cmp);
        scored.truncate(k);
    }
    scored.sort_unstable_by(cmp);
    scored
        .into_iter()
        .map(|(d, s)| ScoredDoc::new(d, s))
        .collect()
}

/// Runs `search` for every query and collects the results into a run.
pub fn run_from_queries<Q, F>(
    tag: &str,
    queries: &BTreeMap<String, Q>,
    exec: Execution,
    search: F,
) -> Result<Run>
where
    Q: Sync,
    F: Fn(&Q) -> Result<Vec<ScoredDoc>> + Sync + Send,
{
    let items: Vec<(&String, &Q)> = queries.iter().collect();
    let results = exec.map(&items, |(qid, q)| {
        search(q).map(|docs| ((*qid).clone(), docs))
    });
    let entries = results.into_iter().collect::<Result<BTreeMap<_, _>>>()?;
    Ok(Run::from_sorted(tag, entries))
}
