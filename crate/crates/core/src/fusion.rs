//! Min-max normalized sum fusion.
//!
//! Each member run is normalized per query over its full retrieved list, then
//! the weighted normalized scores are summed per document. A document a
//! member did not retrieve contributes 0 for that member.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{sort_ranked, Run, ScoredDoc};

pub const DEFAULT_FUSION_DEPTH: usize = 1000;

/// Min-max normalizes a score list in place. A degenerate range maps every
/// score to 1.0.
pub(crate) fn normalize_scores(docs: &mut [ScoredDoc]) {
    let (lo, hi) = docs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
            (lo.min(d.score), hi.max(d.score))
        });
    let range = hi - lo;
    for d in docs.iter_mut() {
        d.score = if range > 0.0 {
            (d.score - lo) / range
        } else {
            1.0
        };
    }
}

/// Rescales every query's scores to [0, 1].
pub fn min_max_normalize(run: &Run) -> Run {
    let entries = run
        .iter()
        .map(|(q, docs)| {
            let mut docs = docs.to_vec();
            normalize_scores(&mut docs);
            // min-max is monotone, but two distinct raw scores can collapse to
            // one normalized value, so re-establish the doc-id tie-break.
            sort_ranked(&mut docs);
            (q.to_string(), docs)
        })
        .collect();
    Run::from_sorted(run.tag(), entries).with_language(run.language().map(str::to_string))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionMember {
    pub run: String,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

/// Which runs are fused, with what weights, under which output tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionSpec {
    pub members: Vec<FusionMember>,
    pub tag: String,
    #[serde(default = "default_depth")]
    pub depth: usize,
}

fn default_depth() -> usize {
    DEFAULT_FUSION_DEPTH
}

impl FusionSpec {
    /// Unweighted fusion of the named runs.
    pub fn unweighted<S: AsRef<str>>(names: &[S], tag: impl Into<String>) -> Self {
        Self {
            members: names
                .iter()
                .map(|n| FusionMember {
                    run: n.as_ref().to_string(),
                    weight: 1.0,
                })
                .collect(),
            tag: tag.into(),
            depth: DEFAULT_FUSION_DEPTH,
        }
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::InvalidArgument(
                "fusion needs at least one member".into(),
            ));
        }
        if self.depth < 1 {
            return Err(Error::InvalidArgument("fusion depth must be >= 1".into()));
        }
        for m in &self.members {
            if !m.weight.is_finite() || m.weight < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "weight {} of member {} must be finite and >= 0",
                    m.weight, m.run
                )));
            }
        }
        Ok(())
    }
}

/// Fuses the runs named in `spec`, looked up in `runs`.
pub fn fuse(spec: &FusionSpec, runs: &BTreeMap<String, Run>) -> Result<Run> {
    spec.validate()?;
    let members = spec
        .members
        .iter()
        .map(|m| {
            runs.get(&m.run)
                .map(|r| (r, m.weight))
                .ok_or_else(|| Error::InvalidArgument(format!("unknown fusion member `{}`", m.run)))
        })
        .collect::<Result<Vec<_>>>()?;
    fuse_runs(&members, &spec.tag, spec.depth, Execution::default())
}

/// Fuses `(run, weight)` pairs directly, summing in member order.
pub fn fuse_runs(members: &[(&Run, f64)], tag: &str, depth: usize, exec: Execution) -> Result<Run> {
    if members.is_empty() {
        return Err(Error::InvalidArgument(
            "fusion needs at least one member".into(),
        ));
    }
    if depth < 1 {
        return Err(Error::InvalidArgument("fusion depth must be >= 1".into()));
    }
    if let Some((_, w)) = members.iter().find(|(_, w)| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "fusion weight {w} must be finite and >= 0"
        )));
    }
    if members.len() > 1 {
        let first: BTreeSet<&str> = members[0].0.query_ids().collect();
        let shared = first
            .iter()
            .any(|q| members[1..].iter().all(|(r, _)| r.contains_query(q)));
        if !shared {
            return Err(Error::InvalidArgument(
                "fusion members share no query ids".into(),
            ));
        }
    }
    let normalized: Vec<(Run, f64)> = members
        .iter()
        .map(|(r, w)| (min_max_normalize(r), *w))
        .collect();
    let queries: Vec<&str> = normalized
        .iter()
        .flat_map(|(r, _)| r.query_ids())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let fused = exec.map(&queries, |&qid| {
        let mut acc: HashMap<&str, f64> = HashMap::new();
        for (run, w) in &normalized {
            for d in run.query(qid).unwrap_or(&[]) {
                *acc.entry(d.doc_id.as_str()).or_insert(0.0) += w * d.score;
            }
        }
        let mut docs: Vec<ScoredDoc> = acc.into_iter().map(|(d, s)| ScoredDoc::new(d, s)).collect();
        sort_ranked(&mut docs);
        docs.truncate(depth);
        (qid.to_string(), docs)
    });
    Ok(Run::from_sorted(tag, fused.into_iter().collect()))
}
