//! Ensemble subset search over candidate runs.
//!
//! Every subset is scored by unweighted min-max fusion followed by the
//! chosen metric on the dev qrels. [`SubsetEvaluator`] precomputes each
//! query's normalized score matrix once, so scoring a subset is a sum over
//! its members and a top-k selection. Sums run in candidate (name) order
//! starting from zero, which is exactly what [`crate::fusion::fuse_runs`]
//! does, so re-fusing a reported subset reproduces its value bit for bit.
//!
//! Ties prefer the smaller subset, then the lexicographically smaller list
//! of member names.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fusion::{fuse_runs, min_max_normalize, DEFAULT_FUSION_DEPTH};
use crate::metrics::{evaluate_with, mean, Gain, Metric, QueryTruth};
use crate::model::{Qrels, Run};

/// Largest candidate count accepted by exhaustive search (2^20 - 1 subsets).
pub const EXHAUSTIVE_CAP: usize = 20;

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub gain: Gain,
    /// Per-query depth of the fused runs being scored.
    pub fusion_depth: usize,
    pub exec: Execution,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            gain: Gain::Linear,
            fusion_depth: DEFAULT_FUSION_DEPTH,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "members")]
pub enum Strategy {
    Exhaustive,
    Greedy,
    /// A fixed member list; members missing for a language are dropped there.
    Fixed(Vec<String>),
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Exhaustive => "exhaustive",
            Strategy::Greedy => "greedy",
            Strategy::Fixed(_) => "fixed",
        }
    }
}

/// The outcome of one subset search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub mode: String,
    pub metric: Metric,
    /// Chosen member names, ascending.
    pub members: Vec<String>,
    pub value: f64,
    pub candidates: Vec<String>,
}

struct QueryMatrix {
    truth: QueryTruth,
    /// Grade of each union document (doc-id ascending); `None` = unjudged.
    grades: Vec<Option<u32>>,
    /// `scores[m][d]`: normalized score of doc `d` in candidate `m`, 0 if absent.
    scores: Vec<Vec<f64>>,
    present: Vec<Vec<bool>>,
}

impl QueryMatrix {
    fn value(&self, members: &[usize], metric: Metric, gain: Gain, top_n: usize) -> f64 {
        let n_docs = self.grades.len();
        let mut fused: Vec<(f64, usize)> = Vec::with_capacity(n_docs);
        for d in 0..n_docs {
            if !members.iter().any(|&m| self.present[m][d]) {
                continue;
            }
            let mut s = 0.0;
            for &m in members {
                s += self.scores[m][d];
            }
            fused.push((s, d));
        }
        let cmp = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        if fused.len() > top_n {
            fused.select_nth_unstable_by(top_n - 1, cmp);
            fused.truncate(top_n);
        }
        fused.sort_unstable_by(cmp);
        let top: Vec<Option<u32>> = fused.iter().map(|&(_, d)| self.grades[d]).collect();
        self.truth.value(metric, gain, &top)
    }
}

/// Scores candidate subsets by fusing and evaluating them.
pub struct SubsetEvaluator {
    names: Vec<String>,
    metric: Metric,
    gain: Gain,
    top_n: usize,
    queries: Vec<QueryMatrix>,
}

impl SubsetEvaluator {
    pub fn new(
        candidates: &BTreeMap<String, Run>,
        qrels: &Qrels,
        metric: Metric,
        opts: &SearchOptions,
    ) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::InvalidArgument("no candidate runs".into()));
        }
        if opts.fusion_depth < 1 {
            return Err(Error::InvalidArgument("fusion depth must be >= 1".into()));
        }
        if !candidates
            .values()
            .any(|r| r.query_ids().any(|q| qrels.query(q).is_some()))
        {
            return Err(Error::DisjointQuerySets);
        }
        let normalized: Vec<Run> = candidates.values().map(min_max_normalize).collect();
        let evaluated: Vec<(&str, &BTreeMap<String, u32>)> = qrels
            .iter()
            .filter(|(_, j)| QueryTruth::new(j, metric, opts.gain).is_evaluated(metric))
            .collect();
        let queries = opts.exec.map(&evaluated, |&(qid, judgments)| {
            let union: BTreeSet<&str> = normalized
                .iter()
                .flat_map(|r| {
                    r.query(qid)
                        .unwrap_or(&[])
                        .iter()
                        .map(|d| d.doc_id.as_str())
                })
                .collect();
            let union: Vec<&str> = union.into_iter().collect();
            let mut scores = vec![vec![0.0; union.len()]; normalized.len()];
            let mut present = vec![vec![false; union.len()]; normalized.len()];
            for (m, run) in normalized.iter().enumerate() {
                for d in run.query(qid).unwrap_or(&[]) {
                    let i = union
                        .binary_search(&d.doc_id.as_str())
                        .expect("doc in union");
                    scores[m][i] = d.score;
                    present[m][i] = true;
                }
            }
            QueryMatrix {
                truth: QueryTruth::new(judgments, metric, opts.gain),
                grades: union.iter().map(|d| judgments.get(*d).copied()).collect(),
                scores,
                present,
            }
        });
        Ok(Self {
            names: candidates.keys().cloned().collect(),
            metric,
            gain: opts.gain,
            top_n: metric.k.min(opts.fusion_depth),
            queries,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Mean metric of the fusion of `members` (candidate indices, ascending).
    pub fn value(&self, members: &[usize]) -> f64 {
        if members.is_empty() {
            return 0.0;
        }
        mean(
            self.queries
                .iter()
                .map(|q| q.value(members, self.metric, self.gain, self.top_n)),
        )
        .0
    }
}

fn mask_members(mask: u64) -> Vec<usize> {
    (0..64).filter(|i| mask & (1 << i) != 0).collect()
}

/// Orders `(members, value)` so that the better choice compares Greater.
fn compare_choices(names: &[String], a: &(Vec<usize>, f64), b: &(Vec<usize>, f64)) -> Ordering {
    a.1.total_cmp(&b.1)
        .then_with(|| b.0.len().cmp(&a.0.len()))
        .then_with(|| {
            let an = a.0.iter().map(|&i| &names[i]);
            let bn = b.0.iter().map(|&i| &names[i]);
            bn.cmp(an)
        })
}

fn sorted_by_name(names: &[String], mut members: Vec<usize>) -> Vec<usize> {
    members.sort_by(|&a, &b| names[a].cmp(&names[b]));
    members
}

/// Exhaustive argmax of `objective` over all non-empty subsets of `names`.
pub(crate) fn search_exhaustive<F>(
    names: &[String],
    objective: F,
    exec: Execution,
) -> Result<(Vec<usize>, f64)>
where
    F: Fn(&[usize]) -> f64 + Sync + Send,
{
    let n = names.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no candidate runs".into()));
    }
    if n > EXHAUSTIVE_CAP {
        return Err(Error::TooManyCandidates {
            n,
            cap: EXHAUSTIVE_CAP,
        });
    }
    let best = exec.max_by_range(
        1,
        1u64 << n,
        |mask| {
            let members = mask_members(mask);
            let v = objective(&members);
            (sorted_by_name(names, members), v)
        },
        |a, b| compare_choices(names, a, b),
    );
    Ok(best.expect("at least one subset"))
}

/// Forward selection: best singleton, then repeatedly the addition that
/// improves `objective` most, until nothing improves it.
pub(crate) fn search_greedy<F>(
    names: &[String],
    objective: F,
    exec: Execution,
) -> Result<(Vec<usize>, f64)>
where
    F: Fn(&[usize]) -> f64 + Sync + Send,
{
    if names.is_empty() {
        return Err(Error::InvalidArgument("no candidate runs".into()));
    }
    let mut current: Vec<usize> = Vec::new();
    let mut current_value = f64::NEG_INFINITY;
    loop {
        let remaining: Vec<usize> = (0..names.len()).filter(|i| !current.contains(i)).collect();
        if remaining.is_empty() {
            break;
        }
        let trials = exec.map(&remaining, |&c| {
            let mut members = current.clone();
            members.push(c);
            members.sort_unstable();
            (c, objective(&members))
        });
        let (add, v) = trials
            .into_iter()
            .max_by(|a, b| {
                a.1.total_cmp(&b.1)
                    .then_with(|| names[b.0].cmp(&names[a.0]))
            })
            .expect("non-empty");
        if v <= current_value {
            break;
        }
        current.push(add);
        current.sort_unstable();
        current_value = v;
    }
    Ok((sorted_by_name(names, current), current_value))
}

fn selection(eval: &SubsetEvaluator, mode: &str, members: Vec<usize>, value: f64) -> Selection {
    Selection {
        mode: mode.to_string(),
        metric: eval.metric,
        members: members.iter().map(|&i| eval.names[i].clone()).collect(),
        value,
        candidates: eval.names.clone(),
    }
}

/// Tries every non-empty subset of at most [`EXHAUSTIVE_CAP`] candidates.
pub fn exhaustive_best_subset(
    candidates: &BTreeMap<String, Run>,
    qrels: &Qrels,
    metric: Metric,
    opts: &SearchOptions,
) -> Result<Selection> {
    if candidates.len() > EXHAUSTIVE_CAP {
        return Err(Error::TooManyCandidates {
            n: candidates.len(),
            cap: EXHAUSTIVE_CAP,
        });
    }
    let eval = SubsetEvaluator::new(candidates, qrels, metric, opts)?;
    let (members, value) = search_exhaustive(&eval.names, |m| eval.value(m), opts.exec)?;
    Ok(selection(&eval, "exhaustive", members, value))
}

pub fn greedy_best_subset(
    candidates: &BTreeMap<String, Run>,
    qrels: &Qrels,
    metric: Metric,
    opts: &SearchOptions,
) -> Result<Selection> {
    let eval = SubsetEvaluator::new(candidates, qrels, metric, opts)?;
    let (members, value) = search_greedy(&eval.names, |m| eval.value(m), opts.exec)?;
    Ok(selection(&eval, "greedy", members, value))
}

/// Scores one given member set.
pub fn fixed_subset<S: AsRef<str>>(
    candidates: &BTreeMap<String, Run>,
    qrels: &Qrels,
    metric: Metric,
    members: &[S],
    opts: &SearchOptions,
) -> Result<Selection> {
    let eval = SubsetEvaluator::new(candidates, qrels, metric, opts)?;
    let mut idx = members
        .iter()
        .map(|m| {
            eval.index_of(m.as_ref()).ok_or_else(|| {
                Error::InvalidArgument(format!("unknown candidate `{}`", m.as_ref()))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    idx.sort_unstable();
    idx.dedup();
    if idx.is_empty() {
        return Err(Error::InvalidArgument("fixed subset is empty".into()));
    }
    let value = eval.value(&idx);
    Ok(selection(&eval, "fixed", idx, value))
}

/// Fuses the selected members as the search scored them.
pub fn fuse_selection(
    selection: &Selection,
    candidates: &BTreeMap<String, Run>,
    tag: &str,
    depth: usize,
) -> Result<Run> {
    let members = selection
        .members
        .iter()
        .map(|m| {
            candidates
                .get(m)
                .map(|r| (r, 1.0))
                .ok_or_else(|| Error::InvalidArgument(format!("unknown candidate `{m}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    fuse_runs(&members, tag, depth, Execution::default())
}

/// Candidate runs and judgments for one language.
#[derive(Debug, Clone, Default)]
pub struct LanguageInput {
    pub runs: BTreeMap<String, Run>,
    pub qrels: Option<Qrels>,
    pub heldout_qrels: Option<Qrels>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LanguageSelection {
    #[serde(flatten)]
    pub selection: Selection,
    pub heldout_value: Option<f64>,
    #[serde(skip)]
    pub fused: Run,
}

/// Selections for every language plus bookkeeping across languages.
#[derive(Debug, Clone, Serialize)]
pub struct SubsetSelection {
    pub mode: String,
    /// `per-language` or `global`.
    pub scope: String,
    pub metric: Metric,
    pub gain: Gain,
    pub languages: BTreeMap<String, LanguageSelection>,
    pub skipped: Vec<String>,
    /// Candidate name → number of languages whose selection includes it.
    pub membership: BTreeMap<String, usize>,
    pub macro_value: f64,
    pub macro_heldout_value: Option<f64>,
}

fn selection_tag(members: &[String], metric: Metric) -> String {
    let joined: String = members
        .iter()
        .map(|m| m.replace(|c: char| c.is_whitespace(), "_"))
        .collect::<Vec<_>>()
        .join("+");
    format!("best:{metric}:{joined}")
}

/// Runs the chosen search independently per language (or once over all
/// languages when `global` is set, maximizing the macro average).
pub fn per_language_selection(
    inputs: &BTreeMap<String, LanguageInput>,
    strategy: &Strategy,
    metric: Metric,
    global: bool,
    opts: &SearchOptions,
) -> Result<SubsetSelection> {
    let mut skipped = Vec::new();
    let mut evaluators: BTreeMap<&str, (SubsetEvaluator, &LanguageInput)> = BTreeMap::new();
    for (lang, input) in inputs {
        let Some(qrels) = &input.qrels else {
            log::warn!("language {lang} has no qrels; skipped");
            skipped.push(lang.clone());
            continue;
        };
        if input.runs.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "language {lang} has no candidate runs"
            )));
        }
        let eval = SubsetEvaluator::new(&input.runs, qrels, metric, opts)
            .map_err(|e| Error::InvalidArgument(format!("language {lang}: {e}")))?;
        evaluators.insert(lang.as_str(), (eval, input));
    }
    if evaluators.is_empty() {
        return Err(Error::InvalidArgument("no language has qrels".into()));
    }

    let mut chosen: BTreeMap<&str, Selection> = BTreeMap::new();
    if global {
        let names: Vec<String> = evaluators
            .values()
            .flat_map(|(e, _)| e.names.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let local = |eval: &SubsetEvaluator, members: &[usize]| -> Vec<usize> {
            members
                .iter()
                .filter_map(|&i| eval.index_of(&names[i]))
                .collect()
        };
        let objective = |members: &[usize]| {
            mean(
                evaluators
                    .values()
                    .map(|(e, _)| e.value(&local(e, members))),
            )
            .0
        };
        let (members, _) = match strategy {
            Strategy::Exhaustive => search_exhaustive(&names, objective, opts.exec)?,
            Strategy::Greedy => search_greedy(&names, objective, opts.exec)?,
            Strategy::Fixed(list) => {
                let idx: Vec<usize> = list
                    .iter()
                    .filter_map(|m| names.iter().position(|n| n == m))
                    .collect();
                (idx, 0.0)
            }
        };
        for (lang, (eval, _)) in &evaluators {
            let mut idx = local(eval, &members);
            idx.sort_unstable();
            if idx.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "global selection has no member available for language {lang}"
                )));
            }
            let value = eval.value(&idx);
            chosen.insert(
                lang,
                selection(
                    eval,
                    strategy.name(),
                    sorted_by_name(&eval.names, idx),
                    value,
                ),
            );
        }
    } else {
        for (lang, (eval, _)) in &evaluators {
            let (members, value) = match strategy {
                Strategy::Exhaustive => {
                    search_exhaustive(&eval.names, |m| eval.value(m), opts.exec)?
                }
                Strategy::Greedy => search_greedy(&eval.names, |m| eval.value(m), opts.exec)?,
                Strategy::Fixed(list) => {
                    let mut idx: Vec<usize> =
                        list.iter().filter_map(|m| eval.index_of(m)).collect();
                    idx.sort_unstable();
                    idx.dedup();
                    if idx.is_empty() {
                        return Err(Error::InvalidArgument(format!(
                            "no fixed member is available for language {lang}"
                        )));
                    }
                    let v = eval.value(&idx);
                    (sorted_by_name(&eval.names, idx), v)
                }
            };
            chosen.insert(lang, selection(eval, strategy.name(), members, value));
        }
    }

    let mut languages = BTreeMap::new();
    let mut membership: BTreeMap<String, usize> = BTreeMap::new();
    for (lang, sel) in chosen {
        let (_, input) = &evaluators[lang];
        for name in input.runs.keys() {
            membership.entry(name.clone()).or_insert(0);
        }
        for m in &sel.members {
            *membership.entry(m.clone()).or_insert(0) += 1;
        }
        let fused = fuse_selection(
            &sel,
            &input.runs,
            &selection_tag(&sel.members, metric),
            opts.fusion_depth,
        )?
        .with_language(Some(lang.to_string()));
        let heldout_value = match &input.heldout_qrels {
            Some(h) => match evaluate_with(&fused, h, &[metric], opts.gain, opts.exec) {
                Ok(r) => r.value(metric),
                Err(e) => {
                    log::warn!("language {lang}: held-out evaluation failed: {e}");
                    None
                }
            },
            None => None,
        };
        languages.insert(
            lang.to_string(),
            LanguageSelection {
                selection: sel,
                heldout_value,
                fused,
            },
        );
    }
    let macro_value = mean(languages.values().map(|l| l.selection.value)).0;
    let heldout: Vec<f64> = languages.values().filter_map(|l| l.heldout_value).collect();
    let macro_heldout_value = (!heldout.is_empty()).then(|| mean(heldout.into_iter()).0);
    Ok(SubsetSelection {
        mode: strategy.name().to_string(),
        scope: if global { "global" } else { "per-language" }.to_string(),
        metric,
        gain: opts.gain,
        languages,
        skipped,
        membership,
        macro_value,
        macro_heldout_value,
    })
}
