//! Brute-force reference implementations and random instance generators
//! shared by the integration tests. Nothing here calls into the library's
//! metric or fusion code.
#![allow(dead_code)]

use std::collections::BTreeMap;

use fusekit::{Qrels, Run, ScoredDoc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Documents of one query in rank order: score descending, id ascending.
pub fn ranked(docs: &[(String, f64)]) -> Vec<(String, f64)> {
    let mut v = docs.to_vec();
    v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    v
}

pub fn run_pairs(run: &Run, qid: &str) -> Vec<(String, f64)> {
    run.query(qid)
        .map(|d| d.iter().map(|s| (s.doc_id.clone(), s.score)).collect())
        .unwrap_or_default()
}

fn log2_discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).ln() * std::f64::consts::LN_2
}

/// Textbook nDCG@k with linear gain, averaged over queries with a relevant
/// judgment. A judged query the run omits scores 0.
pub fn oracle_ndcg(run: &Run, qrels: &Qrels, k: usize) -> f64 {
    let mut total = 0.0;
    let mut n = 0;
    for (qid, judg) in qrels.iter() {
        let mut ideal: Vec<u32> = judg.values().copied().filter(|&g| g > 0).collect();
        if ideal.is_empty() {
            continue;
        }
        ideal.sort_by(|a, b| b.cmp(a));
        let idcg: f64 = ideal
            .iter()
            .take(k)
            .enumerate()
            .map(|(i, &g)| g as f64 * log2_discount(i + 1))
            .sum();
        let docs = ranked(&run_pairs(run, qid));
        let mut dcg = 0.0;
        for (i, (d, _)) in docs.iter().take(k).enumerate() {
            let g = judg.get(d).copied().unwrap_or(0);
            dcg += g as f64 * log2_discount(i + 1);
        }
        total += dcg / idcg;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

pub fn oracle_recall(run: &Run, qrels: &Qrels, k: usize) -> f64 {
    let mut total = 0.0;
    let mut n = 0;
    for (qid, judg) in qrels.iter() {
        let rel = judg.values().filter(|&&g| g > 0).count();
        if rel == 0 {
            continue;
        }
        let docs = ranked(&run_pairs(run, qid));
        let hits = docs
            .iter()
            .take(k)
            .filter(|(d, _)| judg.get(d).is_some_and(|&g| g > 0))
            .count();
        total += hits as f64 / rel as f64;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

/// Fraction of the top-min(k, retrieved) docs carrying any judgment, over
/// every query with judgments.
pub fn oracle_judged(run: &Run, qrels: &Qrels, k: usize) -> f64 {
    let mut total = 0.0;
    let mut n = 0;
    for (qid, judg) in qrels.iter() {
        if judg.is_empty() {
            continue;
        }
        let docs = ranked(&run_pairs(run, qid));
        let top: Vec<_> = docs.iter().take(k).collect();
        if !top.is_empty() {
            total +=
                top.iter().filter(|(d, _)| judg.contains_key(d)).count() as f64 / top.len() as f64;
        }
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

/// Min-max normalized CombSUM over whole lists, written out longhand.
pub fn oracle_fuse(runs: &[&Run]) -> BTreeMap<String, Vec<(String, f64)>> {
    let mut queries: Option<Vec<String>> = None;
    for r in runs {
        let q: Vec<String> = r.query_ids().map(str::to_string).collect();
        queries = Some(match queries {
            None => q,
            Some(prev) => prev.into_iter().filter(|x| q.contains(x)).collect(),
        });
    }
    let mut out = BTreeMap::new();
    for qid in queries.unwrap_or_default() {
        let mut acc: BTreeMap<String, f64> = BTreeMap::new();
        for r in runs {
            let docs = run_pairs(r, &qid);
            let lo = docs.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
            let hi = docs.iter().map(|d| d.1).fold(f64::NEG_INFINITY, f64::max);
            for (d, s) in docs {
                let norm = if hi > lo { (s - lo) / (hi - lo) } else { 1.0 };
                *acc.entry(d).or_insert(0.0) += norm;
            }
        }
        out.insert(qid, ranked(&acc.into_iter().collect::<Vec<_>>()));
    }
    out
}

/// Random run over `n_docs` ids for `n_queries` queries. Scores come from a
/// small grid so ties are common.
pub fn random_run(rng: &mut ChaCha8Rng, tag: &str, n_queries: usize, n_docs: usize) -> Run {
    let mut entries = BTreeMap::new();
    for q in 0..n_queries {
        let len = rng.random_range(1..=n_docs);
        let mut ids: Vec<usize> = (0..n_docs).collect();
        for i in 0..len {
            let j = rng.random_range(i..n_docs);
            ids.swap(i, j);
        }
        let docs = ids[..len]
            .iter()
            .map(|&d| ScoredDoc::new(format!("d{d}"), rng.random_range(-20..=20) as f64 / 4.0))
            .collect();
        entries.insert(format!("q{q}"), docs);
    }
    Run::new(tag, entries).unwrap()
}

/// Random graded qrels; some queries have only non-relevant judgments.
pub fn random_qrels(rng: &mut ChaCha8Rng, n_queries: usize, n_docs: usize) -> Qrels {
    let mut j: BTreeMap<String, BTreeMap<String, u32>> = BTreeMap::new();
    for q in 0..n_queries {
        let e = j.entry(format!("q{q}")).or_default();
        for d in 0..n_docs {
            if rng.random_bool(0.35) {
                e.insert(format!("d{d}"), rng.random_range(0..=3));
            }
        }
        if e.is_empty() {
            e.insert(
                format!("d{}", rng.random_range(0..n_docs)),
                rng.random_range(0..=2),
            );
        }
    }
    Qrels::new(j)
}

pub fn doc_order(run: &Run) -> BTreeMap<String, Vec<String>> {
    run.iter()
        .map(|(q, d)| (q.to_string(), d.iter().map(|s| s.doc_id.clone()).collect()))
        .collect()
}
