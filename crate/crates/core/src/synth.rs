//! Seeded desk-scale test data: corpus, queries, graded qrels, system runs of
//! configurable quality, sparse/dense/multi-vector representations and
//! reranker score files, plus an experiment config wiring them together.
//!
//! Each query owns three topic terms and a topic direction in vector space.
//! One to three documents per query are relevant (grade 1 or 2) and carry
//! those terms and directions strongly; a few judged-negative and unjudged
//! distractors carry them weakly. Everything is derived from a ChaCha RNG, so
//! a seed fully determines every byte written.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    write_corpus, write_dense_vectors, write_multi_vectors, write_qrels, write_queries, write_run,
    write_scorefile, write_sparse_vectors, Corpus, DenseVectorSet, Document, MultiVectorSet, Qrels,
    QuerySet, Run, ScoreFile, ScoredDoc, SparseVectorSet,
};
use crate::pipeline::{ExperimentConfig, LanguageConfig, RetrieverSpec};
use crate::retrievers::Similarity;

const DENSE_DIM: usize = 16;
const TOKEN_DIM: usize = 8;
const RUN_DEPTH: usize = 100;

/// Quality of the generated system runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QualityProfile {
    /// Relevant documents ranked first by grade: nDCG@k = 1.
    Oracle,
    /// Strong relevance signal, rare misses.
    Strong,
    /// Medium signal, each system misses a different third of the relevant
    /// documents, so fusion pays off.
    Mid,
    /// Weak signal, frequent misses.
    Weak,
    /// System i gets a signal that decreases with i.
    Mixed,
}

impl FromStr for QualityProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "strong" => Ok(Self::Strong),
            "mid" => Ok(Self::Mid),
            "weak" => Ok(Self::Weak),
            "mixed" => Ok(Self::Mixed),
            _ => Err(Error::InvalidArgument(format!(
                "unknown quality profile `{s}`"
            ))),
        }
    }
}

impl QualityProfile {
    /// `(signal strength, miss probability)` for system `i` of `n`.
    fn system_params(self, i: usize, n: usize) -> (f64, f64) {
        match self {
            QualityProfile::Oracle => (f64::INFINITY, 0.0),
            QualityProfile::Strong => (3.0, 0.05),
            QualityProfile::Mid => (1.5, 0.35),
            QualityProfile::Weak => (0.7, 0.5),
            QualityProfile::Mixed => {
                let t = if n > 1 {
                    i as f64 / (n - 1) as f64
                } else {
                    0.0
                };
                (3.0 - 2.3 * t, 0.05 + 0.45 * t)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_docs: usize,
    pub n_queries: usize,
    pub n_systems: usize,
    pub profile: QualityProfile,
    /// Reranker 0 is the oracle (score = grade); the rest add growing noise.
    pub n_rerankers: usize,
    pub languages: Vec<String>,
    /// Fraction of queries whose judgments go to a held-out qrels file.
    pub heldout_fraction: f64,
}

impl SynthSpec {
    pub fn new(
        seed: u64,
        n_docs: usize,
        n_queries: usize,
        n_systems: usize,
        profile: QualityProfile,
    ) -> Self {
        Self {
            seed,
            n_docs,
            n_queries,
            n_systems,
            profile,
            n_rerankers: 1,
            languages: vec!["xx".to_string()],
            heldout_fraction: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_docs < 1 || self.n_queries < 1 {
            return Err(Error::InvalidArgument(
                "n_docs and n_queries must be >= 1".into(),
            ));
        }
        if self.languages.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one language is required".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.heldout_fraction) {
            return Err(Error::InvalidArgument(
                "heldout_fraction must be in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Everything generated for one language.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub corpus: Corpus,
    pub queries: QuerySet,
    pub qrels: Qrels,
    pub heldout_qrels: Option<Qrels>,
    pub runs: BTreeMap<String, Run>,
    pub sparse_docs: SparseVectorSet,
    pub sparse_queries: SparseVectorSet,
    pub dense_docs: DenseVectorSet,
    pub dense_queries: DenseVectorSet,
    pub multi_docs: MultiVectorSet,
    pub multi_queries: MultiVectorSet,
    pub rerankers: BTreeMap<String, ScoreFile>,
}

const SYLLABLES: [&str; 24] = [
    "ka", "lo", "mi", "ra", "te", "su", "no", "vi", "da", "pe", "zu", "ri", "ba", "go", "fe", "ti",
    "ma", "sho", "ne", "ku", "la", "po", "ye", "di",
];

fn word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(2..=4);
    (0..n)
        .map(|_| *SYLLABLES.choose(rng).expect("non-empty"))
        .collect()
}

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.into_iter().map(|x| x / n).collect()
}

fn mix(rng: &mut ChaCha8Rng, base: &[f64], weight: f64, noise: f64) -> Vec<f64> {
    let r = unit(rng, base.len());
    let v: Vec<f64> = base
        .iter()
        .zip(&r)
        .map(|(b, e)| weight * b + noise * e)
        .collect();
    round_vec(v)
}

/// Six decimals keep the JSON files short and stable.
fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn round_vec(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(round6).collect()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Relevant(u32),
    Negative,
    Distractor,
}

/// Generates one language's data. `lang_index` decorrelates languages that
/// share a seed.
pub fn make_language(spec: &SynthSpec, lang_index: usize) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(
        spec.seed
            .wrapping_mul(1_000_003)
            .wrapping_add(lang_index as u64),
    );
    let normal = Normal::new(0.0, 1.0).expect("valid normal");

    let mut vocab: BTreeSet<String> = BTreeSet::new();
    while vocab.len() < 300 {
        vocab.insert(word(&mut rng));
    }
    let background: Vec<String> = vocab.into_iter().collect();
    let doc_ids: Vec<String> = (0..spec.n_docs).map(|i| format!("doc{i:05}")).collect();
    let query_ids: Vec<String> = (0..spec.n_queries).map(|i| format!("q{i:04}")).collect();

    // per-query topic terms and directions
    let topic_terms: Vec<Vec<String>> = (0..spec.n_queries)
        .map(|i| {
            (0..3)
                .map(|j| format!("{}{i}{}", word(&mut rng), ["x", "y", "z"][j]))
                .collect()
        })
        .collect();
    let topic_dirs: Vec<Vec<f64>> = (0..spec.n_queries)
        .map(|_| unit(&mut rng, DENSE_DIM))
        .collect();
    let topic_toks: Vec<[Vec<f64>; 2]> = (0..spec.n_queries)
        .map(|_| [unit(&mut rng, TOKEN_DIM), unit(&mut rng, TOKEN_DIM)])
        .collect();

    // assign documents to queries
    let mut order: Vec<usize> = (0..spec.n_docs).collect();
    order.shuffle(&mut rng);
    let mut roles: Vec<Option<(usize, Role)>> = vec![None; spec.n_docs];
    let mut next = 0;
    let mut take = |role: Role, q: usize, roles: &mut Vec<Option<(usize, Role)>>| -> bool {
        if next >= order.len() {
            return false;
        }
        roles[order[next]] = Some((q, role));
        next += 1;
        true
    };
    for q in 0..spec.n_queries {
        let n_rel = rng.random_range(1..=3);
        for _ in 0..n_rel {
            let grade = if rng.random_bool(0.3) { 2 } else { 1 };
            take(Role::Relevant(grade), q, &mut roles);
        }
    }
    for q in 0..spec.n_queries {
        for _ in 0..rng.random_range(1..=3) {
            take(Role::Negative, q, &mut roles);
        }
        for _ in 0..rng.random_range(0..=2) {
            take(Role::Distractor, q, &mut roles);
        }
    }

    let mut corpus = Corpus::default();
    let mut sparse_docs = SparseVectorSet::default();
    let mut dense_docs = BTreeMap::new();
    let mut multi_docs = BTreeMap::new();
    let mut judgments: BTreeMap<String, BTreeMap<String, u32>> = BTreeMap::new();
    let mut rerank_truth: BTreeMap<String, BTreeMap<String, u32>> = BTreeMap::new();
    for (d, id) in doc_ids.iter().enumerate() {
        let mut tokens: Vec<String> = (0..rng.random_range(15..40))
            .map(|_| background.choose(&mut rng).expect("non-empty").clone())
            .collect();
        let (dense, multi) = match roles[d] {
            Some((q, Role::Relevant(grade))) => {
                for t in &topic_terms[q] {
                    for _ in 0..rng.random_range(1..=2 + grade as usize) {
                        tokens.push(t.clone());
                    }
                }
                judgments
                    .entry(query_ids[q].clone())
                    .or_default()
                    .insert(id.clone(), grade);
                rerank_truth
                    .entry(query_ids[q].clone())
                    .or_default()
                    .insert(id.clone(), grade);
                let toks = vec![
                    mix(&mut rng, &topic_toks[q][0], 1.0, 0.3),
                    mix(&mut rng, &topic_toks[q][1], 1.0, 0.3),
                    round_vec(unit(&mut rng, TOKEN_DIM)),
                ];
                (mix(&mut rng, &topic_dirs[q], 1.0, 0.5), toks)
            }
            Some((q, role)) => {
                tokens.push(topic_terms[q][rng.random_range(0..3)].clone());
                if role == Role::Negative {
                    judgments
                        .entry(query_ids[q].clone())
                        .or_default()
                        .insert(id.clone(), 0);
                }
                let toks = vec![
                    mix(&mut rng, &topic_toks[q][0], 0.6, 0.8),
                    round_vec(unit(&mut rng, TOKEN_DIM)),
                ];
                (mix(&mut rng, &topic_dirs[q], 0.5, 1.0), toks)
            }
            None => {
                let toks = (0..3)
                    .map(|_| round_vec(unit(&mut rng, TOKEN_DIM)))
                    .collect();
                (round_vec(unit(&mut rng, DENSE_DIM)), toks)
            }
        };
        tokens.shuffle(&mut rng);
        let split = tokens.len().min(4);
        let title = tokens[..split].join(" ");
        let text = tokens[split..].join(" ");
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        for t in &tokens {
            *tf.entry(t.clone()).or_insert(0.0) += 1.0;
        }
        let weights = tf
            .into_iter()
            .map(|(t, c)| {
                let w = round6((1.0 + c).ln() * rng.random_range(0.5..1.5));
                (t, w.max(1e-6))
            })
            .collect();
        sparse_docs.vectors.insert(id.clone(), weights);
        dense_docs.insert(id.clone(), dense);
        multi_docs.insert(id.clone(), multi);
        corpus.docs.insert(id.clone(), Document { title, text });
    }

    let mut queries = QuerySet::default();
    let mut sparse_queries = SparseVectorSet::default();
    let mut dense_queries = BTreeMap::new();
    let mut multi_queries = BTreeMap::new();
    for (q, qid) in query_ids.iter().enumerate() {
        let mut words = topic_terms[q].clone();
        words.push(background.choose(&mut rng).expect("non-empty").clone());
        queries.queries.insert(qid.clone(), words.join(" "));
        sparse_queries.vectors.insert(
            qid.clone(),
            topic_terms[q].iter().map(|t| (t.clone(), 1.0)).collect(),
        );
        dense_queries.insert(qid.clone(), mix(&mut rng, &topic_dirs[q], 1.0, 0.2));
        multi_queries.insert(
            qid.clone(),
            topic_toks[q].iter().map(|t| round_vec(t.clone())).collect(),
        );
    }

    // system runs
    let mut runs = BTreeMap::new();
    for s in 0..spec.n_systems {
        let (strength, miss) = spec.profile.system_params(s, spec.n_systems);
        let mut entries = BTreeMap::new();
        for (q, qid) in query_ids.iter().enumerate() {
            let judged = judgments.get(qid);
            let mut pool: BTreeSet<usize> = BTreeSet::new();
            for (d, role) in roles.iter().enumerate() {
                if matches!(role, Some((rq, _)) if *rq == q) {
                    pool.insert(d);
                }
            }
            while pool.len() < (RUN_DEPTH + 20).min(spec.n_docs) {
                pool.insert(rng.random_range(0..spec.n_docs));
            }
            let mut docs: Vec<ScoredDoc> = pool
                .into_iter()
                .map(|d| {
                    let grade = judged.and_then(|j| j.get(&doc_ids[d]).copied());
                    let score = if strength.is_infinite() {
                        grade.map_or(0.0, |g| 10.0 * g as f64) + rng.random_range(0.0..1.0)
                    } else {
                        let mut s = normal.sample(&mut rng);
                        match grade {
                            Some(g) if g > 0 && !rng.random_bool(miss) => {
                                s += strength * (1.0 + g as f64)
                            }
                            Some(0) => s += 0.5 * strength,
                            _ => {}
                        }
                        s
                    };
                    ScoredDoc::new(doc_ids[d].clone(), round6(score))
                })
                .collect();
            crate::model::sort_ranked(&mut docs);
            docs.truncate(RUN_DEPTH);
            entries.insert(qid.clone(), docs);
        }
        let name = format!("sys{s}");
        runs.insert(name.clone(), Run::new(name, entries)?);
    }

    // rerankers: score every (query, doc) pair
    let mut rerankers = BTreeMap::new();
    for r in 0..spec.n_rerankers {
        let noise = 0.6 * r as f64;
        let mut sf = ScoreFile::new();
        for qid in &query_ids {
            let truth = rerank_truth.get(qid);
            for id in &doc_ids {
                let g = truth.and_then(|t| t.get(id)).copied().unwrap_or(0) as f64;
                let s = if r == 0 {
                    g
                } else {
                    g + noise * normal.sample(&mut rng)
                };
                sf.insert(qid, id, round6(s))?;
            }
        }
        let name = if r == 0 {
            "oracle".to_string()
        } else {
            format!("rr{r}")
        };
        rerankers.insert(name, sf);
    }

    // dev / held-out split
    let n_heldout = (spec.heldout_fraction * spec.n_queries as f64).round() as usize;
    let heldout_ids: BTreeSet<&String> = query_ids.iter().rev().take(n_heldout).collect();
    let (dev, held): (BTreeMap<_, _>, BTreeMap<_, _>) = judgments
        .into_iter()
        .partition(|(q, _)| !heldout_ids.contains(q));

    Ok(SyntheticData {
        corpus,
        queries,
        qrels: Qrels::new(dev),
        heldout_qrels: (n_heldout > 0).then(|| Qrels::new(held)),
        runs,
        sparse_docs,
        sparse_queries,
        dense_docs: DenseVectorSet {
            dim: DENSE_DIM,
            vectors: dense_docs,
        },
        dense_queries: DenseVectorSet {
            dim: DENSE_DIM,
            vectors: dense_queries,
        },
        multi_docs: MultiVectorSet {
            dim: TOKEN_DIM,
            vectors: multi_docs,
        },
        multi_queries: MultiVectorSet {
            dim: TOKEN_DIM,
            vectors: multi_queries,
        },
        rerankers,
    })
}

/// Single-language generator with one oracle reranker.
pub fn make_synthetic(
    seed: u64,
    n_docs: usize,
    n_queries: usize,
    n_systems: usize,
    profile: QualityProfile,
) -> Result<SyntheticData> {
    make_language(
        &SynthSpec::new(seed, n_docs, n_queries, n_systems, profile),
        0,
    )
}

/// Writes every language's files under `dir/<lang>/` and an experiment
/// config at `dir/config.json` whose paths are relative to `dir`.
pub fn write_synthetic(spec: &SynthSpec, dir: impl AsRef<Path>) -> Result<ExperimentConfig> {
    spec.validate()?;
    let dir = dir.as_ref();
    let mut languages = BTreeMap::new();
    for (i, lang) in spec.languages.iter().enumerate() {
        let data = make_language(spec, i)?;
        let rel = |name: &str| Path::new(lang).join(name);
        let abs = |name: &str| dir.join(lang).join(name);
        write_corpus(&data.corpus, abs("corpus.jsonl"))?;
        write_queries(&data.queries, abs("queries.tsv"))?;
        write_qrels(&data.qrels, abs("dev.qrels"))?;
        if let Some(h) = &data.heldout_qrels {
            write_qrels(h, abs("heldout.qrels"))?;
        }
        write_sparse_vectors(&data.sparse_docs, abs("sparse_docs.jsonl"))?;
        write_sparse_vectors(&data.sparse_queries, abs("sparse_queries.jsonl"))?;
        write_dense_vectors(&data.dense_docs, abs("dense_docs.jsonl"))?;
        write_dense_vectors(&data.dense_queries, abs("dense_queries.jsonl"))?;
        write_multi_vectors(&data.multi_docs, abs("maxsim_docs.jsonl"))?;
        write_multi_vectors(&data.multi_queries, abs("maxsim_queries.jsonl"))?;
        let mut runs = BTreeMap::new();
        for (name, run) in &data.runs {
            let file = format!("runs/{name}.trec");
            write_run(run, abs(&file), name)?;
            runs.insert(name.clone(), rel(&file));
        }
        let mut rerankers = BTreeMap::new();
        for (name, sf) in &data.rerankers {
            let file = format!("rerank/{name}.txt");
            write_scorefile(sf, abs(&file))?;
            rerankers.insert(name.clone(), rel(&file));
        }
        languages.insert(
            lang.clone(),
            LanguageConfig {
                corpus: Some(rel("corpus.jsonl")),
                queries: Some(rel("queries.tsv")),
                qrels: rel("dev.qrels"),
                heldout_qrels: data.heldout_qrels.as_ref().map(|_| rel("heldout.qrels")),
                runs,
                retrievers: vec![
                    RetrieverSpec::Bm25 {
                        name: "bm25".into(),
                        k1: None,
                        b: None,
                    },
                    RetrieverSpec::Sparse {
                        name: "sparse".into(),
                        docs: rel("sparse_docs.jsonl"),
                        queries: rel("sparse_queries.jsonl"),
                    },
                    RetrieverSpec::Dense {
                        name: "dense".into(),
                        docs: rel("dense_docs.jsonl"),
                        queries: rel("dense_queries.jsonl"),
                        similarity: Similarity::Cosine,
                    },
                ],
                fixed_hybrids: BTreeMap::new(),
                rerankers,
            },
        );
    }
    let mut config = ExperimentConfig::new("out", languages);
    config.seed = Some(spec.seed);
    crate::model::write_text(
        &dir.join("config.json"),
        &(serde_json::to_string_pretty(&config)? + "\n"),
    )?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{evaluate, Gain, Metric};

    #[test]
    fn deterministic_per_seed() {
        let a = make_synthetic(3, 200, 10, 2, QualityProfile::Mid).unwrap();
        let b = make_synthetic(3, 200, 10, 2, QualityProfile::Mid).unwrap();
        assert_eq!(a.runs, b.runs);
        assert_eq!(a.corpus, b.corpus);
        assert_eq!(a.qrels, b.qrels);
        let c = make_synthetic(4, 200, 10, 2, QualityProfile::Mid).unwrap();
        assert_ne!(a.corpus, c.corpus);
    }

    #[test]
    fn oracle_profile_is_perfect() {
        let d = make_synthetic(1, 300, 15, 1, QualityProfile::Oracle).unwrap();
        let r = evaluate(&d.runs["sys0"], &d.qrels, &[Metric::ndcg(10)], Gain::Linear).unwrap();
        assert_eq!(r.value(Metric::ndcg(10)), Some(1.0));
    }

    #[test]
    fn diverse_mid_systems_gain_from_fusion() {
        let d = make_synthetic(2, 600, 40, 2, QualityProfile::Mid).unwrap();
        let m = Metric::ndcg(10);
        let single = |r: &Run| evaluate(r, &d.qrels, &[m], Gain::Linear).unwrap().value(m).unwrap();
        let (a, b) = (&d.runs["sys0"], &d.runs["sys1"]);
        let fused = crate::fusion::fuse_runs(&[(a, 1.0), (b, 1.0)], "h", 1000, Default::default()).unwrap();
        assert!(single(&fused) >= single(a).max(single(b)));
    }

    #[test]
    fn invalid_sizes() {
        assert!(make_synthetic(1, 0, 5, 1, QualityProfile::Mid).is_err());
        assert!(make_synthetic(1, 5, 0, 1, QualityProfile::Mid).is_err());
        assert!("nope".parse::<QualityProfile>().is_err());
    }
}
