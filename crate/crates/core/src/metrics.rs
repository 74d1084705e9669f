//! nDCG@k, Recall@k and Judged@k with per-query and mean reporting.
//!
//! The evaluated query set is taken from the qrels: nDCG and recall use the
//! queries with at least one relevant (grade > 0) document, Judged@k uses
//! every query with any judgment. A query the run does not retrieve for
//! scores 0.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{Qrels, Run, ScoredDoc};

/// Gain applied to a relevance grade inside DCG.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gain {
    /// gain(r) = r
    #[default]
    Linear,
    /// gain(r) = 2^r - 1
    Exponential,
}

impl Gain {
    pub fn apply(self, grade: u32) -> f64 {
        match self {
            Gain::Linear => grade as f64,
            Gain::Exponential => 2f64.powi(grade as i32) - 1.0,
        }
    }
}

impl FromStr for Gain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Gain::Linear),
            "exponential" | "exp" => Ok(Gain::Exponential),
            _ => Err(Error::InvalidArgument(format!("unknown gain mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricKind {
    Ndcg,
    Recall,
    Judged,
}

/// A metric with its cutoff, written `ndcg@10`, `recall@100`, `judged@10`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Metric {
    pub kind: MetricKind,
    pub k: usize,
}

impl Metric {
    pub fn new(kind: MetricKind, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidArgument(format!(
                "cutoff must be >= 1, got {k}"
            )));
        }
        Ok(Self { kind, k })
    }

    pub fn ndcg(k: usize) -> Self {
        Self::new(MetricKind::Ndcg, k).expect("k >= 1")
    }

    pub fn recall(k: usize) -> Self {
        Self::new(MetricKind::Recall, k).expect("k >= 1")
    }

    pub fn judged(k: usize) -> Self {
        Self::new(MetricKind::Judged, k).expect("k >= 1")
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            MetricKind::Ndcg => "ndcg",
            MetricKind::Recall => "recall",
            MetricKind::Judged => "judged",
        };
        write!(f, "{name}@{}", self.k)
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (name, k) = lower
            .split_once('@')
            .ok_or_else(|| Error::InvalidArgument(format!("metric `{s}` needs an @k cutoff")))?;
        let k: usize = k
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad cutoff in metric `{s}`")))?;
        let kind = match name {
            "ndcg" => MetricKind::Ndcg,
            "recall" => MetricKind::Recall,
            "judged" => MetricKind::Judged,
            _ => return Err(Error::InvalidArgument(format!("unknown metric `{s}`"))),
        };
        Metric::new(kind, k)
    }
}

impl Serialize for Metric {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Discounted cumulative gain of a grade sequence, position 1 first.
pub(crate) fn dcg(grades: impl Iterator<Item = u32>, gain: Gain) -> f64 {
    grades
        .enumerate()
        .map(|(i, g)| gain.apply(g) / ((i + 2) as f64).log2())
        .sum()
}

/// Per-query quantities derived from the judgments alone.
#[derive(Debug, Clone)]
pub(crate) struct QueryTruth {
    pub n_relevant: usize,
    pub n_judged: usize,
    /// DCG of the ideal ordering cut at the metric's k (0 when no relevant).
    pub ideal_dcg: f64,
}

impl QueryTruth {
    pub fn new(judgments: &BTreeMap<String, u32>, metric: Metric, gain: Gain) -> Self {
        let mut grades: Vec<u32> = judgments.values().copied().filter(|&g| g > 0).collect();
        grades.sort_unstable_by(|a, b| b.cmp(a));
        let ideal_dcg = if metric.kind == MetricKind::Ndcg {
            dcg(grades.iter().copied().take(metric.k), gain)
        } else {
            0.0
        };
        Self {
            n_relevant: grades.len(),
            n_judged: judgments.len(),
            ideal_dcg,
        }
    }

    /// Whether this query takes part in the metric's mean.
    pub fn is_evaluated(&self, metric: Metric) -> bool {
        match metric.kind {
            MetricKind::Ndcg | MetricKind::Recall => self.n_relevant > 0,
            MetricKind::Judged => self.n_judged > 0,
        }
    }

    /// Metric value for a ranking given the grades of its top
    /// `min(k, retrieved)` documents (`None` = unjudged).
    pub fn value(&self, metric: Metric, gain: Gain, top: &[Option<u32>]) -> f64 {
        let top = &top[..top.len().min(metric.k)];
        match metric.kind {
            MetricKind::Ndcg => {
                if self.ideal_dcg <= 0.0 {
                    return 0.0;
                }
                dcg(top.iter().map(|g| g.unwrap_or(0)), gain) / self.ideal_dcg
            }
            MetricKind::Recall => {
                if self.n_relevant == 0 {
                    return 0.0;
                }
                let hits = top.iter().filter(|g| g.is_some_and(|g| g > 0)).count();
                hits as f64 / self.n_relevant as f64
            }
            MetricKind::Judged => {
                if top.is_empty() {
                    return 0.0;
                }
                top.iter().filter(|g| g.is_some()).count() as f64 / top.len() as f64
            }
        }
    }
}

pub(crate) fn top_grades(
    docs: &[ScoredDoc],
    judgments: &BTreeMap<String, u32>,
    k: usize,
) -> Vec<Option<u32>> {
    docs.iter()
        .take(k)
        .map(|d| judgments.get(&d.doc_id).copied())
        .collect()
}

/// Arithmetic mean in iteration order; 0 for an empty sequence.
pub(crate) fn mean(values: impl Iterator<Item = f64>) -> (f64, usize) {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        (0.0, 0)
    } else {
        (sum / n as f64, n)
    }
}

/// Per-query and mean metric values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metrics: Vec<Metric>,
    pub gain: Gain,
    /// query id → metric name → value (only the metrics the query is
    /// evaluated for).
    pub per_query: BTreeMap<String, BTreeMap<String, f64>>,
    /// metric name → mean over evaluated queries.
    pub aggregates: BTreeMap<String, f64>,
    /// metric name → number of evaluated queries.
    pub n_queries_evaluated: BTreeMap<String, usize>,
}

impl EvalReport {
    pub fn value(&self, metric: Metric) -> Option<f64> {
        self.aggregates.get(&metric.to_string()).copied()
    }

    pub fn query_value(&self, qid: &str, metric: Metric) -> Option<f64> {
        self.per_query.get(qid)?.get(&metric.to_string()).copied()
    }

    /// Tab-separated `query<TAB>metric<TAB>value` rows, then `all` rows with
    /// the means.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("query\tmetric\tvalue\n");
        for (q, vals) in &self.per_query {
            for m in &self.metrics {
                if let Some(v) = vals.get(&m.to_string()) {
                    out.push_str(&format!("{q}\t{m}\t{v:.6}\n"));
                }
            }
        }
        for m in &self.metrics {
            let name = m.to_string();
            out.push_str(&format!("all\t{name}\t{:.6}\n", self.aggregates[&name]));
        }
        out
    }

    /// JSON summary without the per-query table.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "gain": self.gain,
            "metrics": self.metrics,
            "aggregates": self.aggregates,
            "n_queries_evaluated": self.n_queries_evaluated,
        })
    }
}

/// Evaluates `run` against `qrels` for every metric in `metrics`.
pub fn evaluate(run: &Run, qrels: &Qrels, metrics: &[Metric], gain: Gain) -> Result<EvalReport> {
    evaluate_with(run, qrels, metrics, gain, Execution::default())
}

pub fn evaluate_with(
    run: &Run,
    qrels: &Qrels,
    metrics: &[Metric],
    gain: Gain,
    exec: Execution,
) -> Result<EvalReport> {
    if metrics.is_empty() {
        return Err(Error::InvalidArgument("no metrics requested".into()));
    }
    if !run.query_ids().any(|q| qrels.query(q).is_some()) {
        return Err(Error::DisjointQuerySets);
    }
    let queries: Vec<(&str, &BTreeMap<String, u32>)> = qrels.iter().collect();
    let per_query: Vec<BTreeMap<String, f64>> = exec.map(&queries, |&(qid, judgments)| {
        let docs = run.query(qid).unwrap_or(&[]);
        let mut vals = BTreeMap::new();
        for &m in metrics {
            let truth = QueryTruth::new(judgments, m, gain);
            if truth.is_evaluated(m) {
                let top = top_grades(docs, judgments, m.k);
                vals.insert(m.to_string(), truth.value(m, gain, &top));
            }
        }
        vals
    });
    let mut aggregates = BTreeMap::new();
    let mut counts = BTreeMap::new();
    for m in metrics {
        let name = m.to_string();
        let (avg, n) = mean(per_query.iter().filter_map(|v| v.get(&name).copied()));
        aggregates.insert(name.clone(), avg);
        counts.insert(name, n);
    }
    Ok(EvalReport {
        metrics: metrics.to_vec(),
        gain,
        per_query: queries
            .iter()
            .map(|(q, _)| q.to_string())
            .zip(per_query)
            .filter(|(_, v)| !v.is_empty())
            .collect(),
        aggregates,
        n_queries_evaluated: counts,
    })
}

pub fn ndcg_at_k(run: &Run, qrels: &Qrels, k: usize, gain: Gain) -> Result<EvalReport> {
    evaluate(run, qrels, &[Metric::new(MetricKind::Ndcg, k)?], gain)
}

pub fn recall_at_k(run: &Run, qrels: &Qrels, k: usize) -> Result<EvalReport> {
    evaluate(
        run,
        qrels,
        &[Metric::new(MetricKind::Recall, k)?],
        Gain::Linear,
    )
}

pub fn judged_at_k(run: &Run, qrels: &Qrels, k: usize) -> Result<EvalReport> {
    evaluate(
        run,
        qrels,
        &[Metric::new(MetricKind::Judged, k)?],
        Gain::Linear,
    )
}

/// Unweighted mean over languages.
pub fn macro_average(per_language: &BTreeMap<String, f64>) -> Result<f64> {
    if per_language.is_empty() {
        return Err(Error::InvalidArgument(
            "macro average over zero languages".into(),
        ));
    }
    Ok(mean(per_language.values().copied()).0)
}

/// One-decimal display rounding used by leaderboard tables.
pub fn round1(x: f64) -> String {
    format!("{x:.1}")
}
