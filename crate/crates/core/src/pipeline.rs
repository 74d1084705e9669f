//! Experiment configs and the end-to-end pipeline: first-stage retrieval,
//! fixed hybrids, per-language subset selection, reranker depth sweeps, the
//! final reranking-hybrid selection and a leaderboard.
//!
//! Every written run carries the artifact name and a config hash in its tag,
//! and `manifest.json` lists each output file with the command and hash that
//! produced it. Outputs contain no timestamps, so two runs of the same config
//! are byte-identical.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fusion::{fuse_runs, DEFAULT_FUSION_DEPTH};
use crate::leaderboard::Leaderboard;
use crate::metrics::{evaluate_with, Gain, Metric};
use crate::model::{
    parse_corpus, parse_dense_vectors, parse_multi_vectors, parse_qrels, parse_queries, parse_run,
    parse_scorefile, parse_sparse_vectors, read_text, write_run, write_text, Corpus, ParseOptions,
    Qrels, QuerySet, Run,
};
use crate::rerank::{sweep_depth_with, DEFAULT_DEPTHS, HEAD_MAX, HEAD_MIN, TAIL_SCALE};
use crate::retrievers::{
    bm25_search, build_index, dense_search, maxsim_search, run_from_queries, Bm25Params,
    Similarity, SparseIndex,
};
use crate::sweep::{
    per_language_selection, LanguageInput, SearchOptions, Strategy, SubsetSelection,
};

pub const BEST_HYBRID: &str = "hybrid_best";
pub const ALL_HYBRID: &str = "hybrid_all";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    #[default]
    Exhaustive,
    Greedy,
}

impl std::str::FromStr for SelectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(Self::Exhaustive),
            "greedy" => Ok(Self::Greedy),
            _ => Err(Error::InvalidArgument(format!(
                "unknown selection mode `{s}`"
            ))),
        }
    }
}

impl SelectionMode {
    fn strategy(self) -> Strategy {
        match self {
            SelectionMode::Exhaustive => Strategy::Exhaustive,
            SelectionMode::Greedy => Strategy::Greedy,
        }
    }
}

/// A first-stage retriever to run inside the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RetrieverSpec {
    /// BM25 over the language's corpus and query texts.
    Bm25 {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k1: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<f64>,
    },
    Sparse {
        name: String,
        docs: PathBuf,
        queries: PathBuf,
    },
    Dense {
        name: String,
        docs: PathBuf,
        queries: PathBuf,
        #[serde(default)]
        similarity: Similarity,
    },
    Maxsim {
        name: String,
        docs: PathBuf,
        queries: PathBuf,
    },
}

impl RetrieverSpec {
    pub fn name(&self) -> &str {
        match self {
            RetrieverSpec::Bm25 { name, .. }
            | RetrieverSpec::Sparse { name, .. }
            | RetrieverSpec::Dense { name, .. }
            | RetrieverSpec::Maxsim { name, .. } => name,
        }
    }

    fn paths(&self) -> Vec<&Path> {
        match self {
            RetrieverSpec::Bm25 { .. } => vec![],
            RetrieverSpec::Sparse { docs, queries, .. }
            | RetrieverSpec::Dense { docs, queries, .. }
            | RetrieverSpec::Maxsim { docs, queries, .. } => vec![docs, queries],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queries: Option<PathBuf>,
    pub qrels: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heldout_qrels: Option<PathBuf>,
    /// Precomputed candidate runs by name.
    #[serde(default)]
    pub runs: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub retrievers: Vec<RetrieverSpec>,
    /// Named fixed hybrids over candidate names.
    #[serde(default)]
    pub fixed_hybrids: BTreeMap<String, Vec<String>>,
    /// Reranker score files by name.
    #[serde(default)]
    pub rerankers: BTreeMap<String, PathBuf>,
}

fn default_metric() -> Metric {
    Metric::ndcg(10)
}

fn default_report_metrics() -> Vec<Metric> {
    vec![Metric::ndcg(10), Metric::recall(20), Metric::recall(100)]
}

fn default_depths() -> Vec<usize> {
    DEFAULT_DEPTHS.to_vec()
}

fn default_fusion_depth() -> usize {
    DEFAULT_FUSION_DEPTH
}

fn default_retrieval_depth() -> usize {
    1000
}

/// A whole experiment. Relative paths resolve against the config file's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    /// Selection metric for subsets and rerank depths.
    #[serde(default = "default_metric")]
    pub metric: Metric,
    #[serde(default)]
    pub gain: Gain,
    #[serde(default = "default_report_metrics")]
    pub report_metrics: Vec<Metric>,
    #[serde(default = "default_depths")]
    pub rerank_depths: Vec<usize>,
    #[serde(default)]
    pub selection_mode: SelectionMode,
    #[serde(default)]
    pub global_selection: bool,
    #[serde(default = "default_fusion_depth")]
    pub fusion_depth: usize,
    #[serde(default = "default_retrieval_depth")]
    pub retrieval_depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub languages: BTreeMap<String, LanguageConfig>,
    #[serde(skip)]
    base_dir: PathBuf,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

impl ExperimentConfig {
    pub fn new(
        output_dir: impl Into<PathBuf>,
        languages: BTreeMap<String, LanguageConfig>,
    ) -> Self {
        Self {
            output_dir: output_dir.into(),
            metric: default_metric(),
            gain: Gain::default(),
            report_metrics: default_report_metrics(),
            rerank_depths: default_depths(),
            selection_mode: SelectionMode::default(),
            global_selection: false,
            fusion_depth: default_fusion_depth(),
            retrieval_depth: default_retrieval_depth(),
            seed: None,
            languages,
            base_dir: PathBuf::new(),
        }
    }

    /// Reads and validates a config; every referenced file must exist.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut config: ExperimentConfig = serde_json::from_str(&read_text(path)?)
            .map_err(|e| Error::InvalidData(format!("{}: {e}", path.display())))?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.validate()?;
        Ok(config)
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = dir.into();
        self
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// Short hex digest of the serialized config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .take(6)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.languages.is_empty() {
            return Err(Error::InvalidArgument("config lists no languages".into()));
        }
        if self.rerank_depths.is_empty() || self.rerank_depths.contains(&0) {
            return Err(Error::InvalidArgument(
                "rerank depths must be non-empty and >= 1".into(),
            ));
        }
        if self.fusion_depth < 1 || self.retrieval_depth < 1 {
            return Err(Error::InvalidArgument("depths must be >= 1".into()));
        }
        let exists = |p: &Path| -> Result<()> {
            let full = self.resolve(p);
            if full.exists() {
                Ok(())
            } else {
                Err(Error::MissingPath(full))
            }
        };
        for (lang, lc) in &self.languages {
            if !valid_name(lang) {
                return Err(Error::InvalidArgument(format!(
                    "invalid language name `{lang}`"
                )));
            }
            exists(&lc.qrels)?;
            for p in lc.corpus.iter().chain(&lc.queries).chain(&lc.heldout_qrels) {
                exists(p)?;
            }
            for p in lc.runs.values().chain(lc.rerankers.values()) {
                exists(p)?;
            }
            let mut names = BTreeSet::new();
            for name in lc
                .runs
                .keys()
                .map(String::as_str)
                .chain(lc.retrievers.iter().map(|r| r.name()))
            {
                if !valid_name(name) || name == BEST_HYBRID || name == ALL_HYBRID {
                    return Err(Error::InvalidArgument(format!(
                        "invalid candidate name `{name}` in {lang}"
                    )));
                }
                if !names.insert(name) {
                    return Err(Error::InvalidArgument(format!(
                        "duplicate candidate name `{name}` in {lang}"
                    )));
                }
            }
            if names.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "language {lang} has no candidate runs"
                )));
            }
            for r in &lc.retrievers {
                for p in r.paths() {
                    exists(p)?;
                }
                if matches!(r, RetrieverSpec::Bm25 { .. })
                    && (lc.corpus.is_none() || lc.queries.is_none())
                {
                    return Err(Error::InvalidArgument(format!(
                        "bm25 retriever `{}` in {lang} needs corpus and queries",
                        r.name()
                    )));
                }
            }
            for (h, members) in &lc.fixed_hybrids {
                if !valid_name(h) || members.is_empty() {
                    return Err(Error::InvalidArgument(format!(
                        "invalid fixed hybrid `{h}` in {lang}"
                    )));
                }
                if let Some(m) = members.iter().find(|m| !names.contains(m.as_str())) {
                    return Err(Error::InvalidArgument(format!(
                        "fixed hybrid `{h}` in {lang} references unknown run `{m}`"
                    )));
                }
            }
            for name in lc.rerankers.keys() {
                if !valid_name(name) || name == BEST_HYBRID {
                    return Err(Error::InvalidArgument(format!(
                        "invalid reranker name `{name}` in {lang}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub language: String,
    pub artifact: String,
    pub command: String,
    pub config_hash: String,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RerankSummary {
    pub best_depth: usize,
    /// `(depth, metric)` for each depth tried.
    pub values: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LanguageSummary {
    /// artifact → metric name → mean value.
    pub evaluations: BTreeMap<String, BTreeMap<String, f64>>,
    pub rerank_sweeps: BTreeMap<String, RerankSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineSummary {
    pub config_hash: String,
    pub metric: Metric,
    pub languages: BTreeMap<String, LanguageSummary>,
    pub first_stage_selection: SubsetSelection,
    pub final_selection: SubsetSelection,
    pub leaderboard: Leaderboard,
}

struct Stage<'a> {
    config: &'a ExperimentConfig,
    hash: String,
    out: PathBuf,
    manifest: Vec<ManifestEntry>,
    summaries: BTreeMap<String, LanguageSummary>,
    report_metrics: Vec<Metric>,
    exec: Execution,
}

impl Stage<'_> {
    fn write(
        &mut self,
        lang: &str,
        rel: &str,
        artifact: &str,
        detail: String,
        run: &Run,
    ) -> Result<()> {
        let file = format!("{lang}/{rel}");
        write_run(
            run,
            self.out.join(&file),
            &format!("{}.cfg-{}", run.tag(), self.hash),
        )?;
        self.manifest.push(ManifestEntry {
            file,
            language: lang.to_string(),
            artifact: artifact.to_string(),
            command: "pipeline".into(),
            config_hash: self.hash.clone(),
            detail,
        });
        Ok(())
    }

    fn evaluate(&mut self, lang: &str, artifact: &str, run: &Run, qrels: &Qrels) -> Result<()> {
        let report = evaluate_with(
            run,
            qrels,
            &self.report_metrics,
            self.config.gain,
            self.exec,
        )?;
        self.summaries
            .entry(lang.to_string())
            .or_default()
            .evaluations
            .insert(artifact.to_string(), report.aggregates);
        Ok(())
    }
}

struct LanguageData {
    qrels: Qrels,
    heldout: Option<Qrels>,
    corpus: Option<Corpus>,
    queries: Option<QuerySet>,
    candidates: BTreeMap<String, Run>,
}

fn retrieve(
    config: &ExperimentConfig,
    spec: &RetrieverSpec,
    data: &LanguageData,
    exec: Execution,
) -> Result<Run> {
    let k = config.retrieval_depth;
    let tag = spec.name();
    match spec {
        RetrieverSpec::Bm25 { k1, b, .. } => {
            let defaults = Bm25Params::default();
            let params = Bm25Params::new(k1.unwrap_or(defaults.k1), b.unwrap_or(defaults.b))?;
            let corpus = data.corpus.as_ref().expect("validated");
            let queries = data.queries.as_ref().expect("validated");
            let index = build_index(corpus)?;
            run_from_queries(tag, &queries.queries, exec, |q| {
                bm25_search(&index, q, params, k)
            })
        }
        RetrieverSpec::Sparse { docs, queries, .. } => {
            let index = SparseIndex::new(&parse_sparse_vectors(config.resolve(docs))?);
            let qs = parse_sparse_vectors(config.resolve(queries))?;
            run_from_queries(tag, &qs.vectors, exec, |q| index.search(q, k))
        }
        RetrieverSpec::Dense {
            docs,
            queries,
            similarity,
            ..
        } => {
            let d = parse_dense_vectors(config.resolve(docs), None)?;
            let qs = parse_dense_vectors(config.resolve(queries), Some(d.dim))?;
            run_from_queries(tag, &qs.vectors, exec, |q| {
                dense_search(&d, q, k, *similarity)
            })
        }
        RetrieverSpec::Maxsim { docs, queries, .. } => {
            let d = parse_multi_vectors(config.resolve(docs), None)?;
            let qs = parse_multi_vectors(config.resolve(queries), (d.dim > 0).then_some(d.dim))?;
            run_from_queries(tag, &qs.vectors, exec, |q| maxsim_search(&d, q, k))
        }
    }
}

fn scaled(values: impl Iterator<Item = (String, f64)>) -> BTreeMap<String, f64> {
    values.map(|(l, v)| (l, 100.0 * v)).collect()
}

/// Runs every stage of `config`, writing artifacts under its output dir.
pub fn run_pipeline(config: &ExperimentConfig) -> Result<PipelineSummary> {
    run_pipeline_with(config, Execution::default())
}

pub fn run_pipeline_with(config: &ExperimentConfig, exec: Execution) -> Result<PipelineSummary> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let mut report_metrics = config.report_metrics.clone();
    if !report_metrics.contains(&config.metric) {
        report_metrics.insert(0, config.metric);
    }
    let mut st = Stage {
        config,
        hash: config.hash(),
        out: config.output_path(),
        manifest: Vec::new(),
        summaries: BTreeMap::new(),
        report_metrics,
        exec,
    };
    let opts = SearchOptions {
        gain: config.gain,
        fusion_depth: config.fusion_depth,
        exec,
    };

    // load
    let mut langs: BTreeMap<String, LanguageData> = BTreeMap::new();
    for (lang, lc) in &config.languages {
        let load = || -> Result<LanguageData> {
            let mut candidates = BTreeMap::new();
            for (name, path) in &lc.runs {
                let run = parse_run(config.resolve(path), ParseOptions::default())?;
                candidates.insert(
                    name.clone(),
                    run.with_tag(name.clone()).with_language(Some(lang.clone())),
                );
            }
            Ok(LanguageData {
                qrels: parse_qrels(config.resolve(&lc.qrels))?.with_language(Some(lang.clone())),
                heldout: lc
                    .heldout_qrels
                    .as_ref()
                    .map(|p| parse_qrels(config.resolve(p)))
                    .transpose()?,
                corpus: lc
                    .corpus
                    .as_ref()
                    .map(|p| parse_corpus(config.resolve(p)))
                    .transpose()?,
                queries: lc
                    .queries
                    .as_ref()
                    .map(|p| parse_queries(config.resolve(p)))
                    .transpose()?,
                candidates,
            })
        };
        langs.insert(lang.clone(), load().map_err(|e| e.in_stage("load"))?);
    }

    // first stage
    for (lang, lc) in &config.languages {
        let data = langs.get_mut(lang).expect("loaded");
        for spec in &lc.retrievers {
            let run = retrieve(config, spec, data, exec)
                .map_err(|e| e.in_stage("retrieve"))?
                .with_language(Some(lang.clone()));
            st.write(
                lang,
                &format!("first_stage/{}.trec", spec.name()),
                spec.name(),
                serde_json::to_string(spec)?,
                &run,
            )
            .map_err(|e| e.in_stage("retrieve"))?;
            data.candidates.insert(spec.name().to_string(), run);
        }
        for (name, run) in &data.candidates {
            st.evaluate(lang, name, run, &data.qrels)
                .map_err(|e| e.in_stage("evaluate"))?;
        }
    }

    // fixed hybrids
    for (lang, lc) in &config.languages {
        let data = &langs[lang];
        let mut hybrids: Vec<(String, Vec<String>)> = vec![(
            ALL_HYBRID.to_string(),
            data.candidates.keys().cloned().collect(),
        )];
        hybrids.extend(lc.fixed_hybrids.iter().map(|(h, m)| (h.clone(), m.clone())));
        for (name, members) in hybrids {
            let mut members = members;
            members.sort();
            members.dedup();
            let refs: Vec<(&Run, f64)> =
                members.iter().map(|m| (&data.candidates[m], 1.0)).collect();
            let run = fuse_runs(&refs, &name, config.fusion_depth, exec)
                .map_err(|e| e.in_stage("fuse"))?;
            let artifact = if name == ALL_HYBRID {
                name.clone()
            } else {
                format!("hybrid-{name}")
            };
            st.write(
                lang,
                &format!("hybrids/{artifact}.trec"),
                &artifact,
                format!("min-max sum of {}", members.join("+")),
                &run,
            )
            .and_then(|_| st.evaluate(lang, &artifact, &run, &data.qrels))
            .map_err(|e| e.in_stage("fuse"))?;
        }
    }

    // subset selection
    let inputs: BTreeMap<String, LanguageInput> = langs
        .iter()
        .map(|(lang, d)| {
            (
                lang.clone(),
                LanguageInput {
                    runs: d.candidates.clone(),
                    qrels: Some(d.qrels.clone()),
                    heldout_qrels: d.heldout.clone(),
                },
            )
        })
        .collect();
    let first_sel = per_language_selection(
        &inputs,
        &config.selection_mode.strategy(),
        config.metric,
        config.global_selection,
        &opts,
    )
    .map_err(|e| e.in_stage("select"))?;
    let mut best: BTreeMap<String, Run> = BTreeMap::new();
    for (lang, sel) in &first_sel.languages {
        let run = sel.fused.clone();
        st.write(
            lang,
            &format!("hybrids/{BEST_HYBRID}.trec"),
            BEST_HYBRID,
            format!("selected {}", sel.selection.members.join("+")),
            &run,
        )
        .and_then(|_| st.evaluate(lang, BEST_HYBRID, &run, &langs[lang].qrels))
        .map_err(|e| e.in_stage("select"))?;
        best.insert(lang.clone(), run);
    }

    // rerank depth sweeps
    let mut final_inputs: BTreeMap<String, LanguageInput> = BTreeMap::new();
    for (lang, lc) in &config.languages {
        let data = &langs[lang];
        let mut runs = BTreeMap::new();
        runs.insert(BEST_HYBRID.to_string(), best[lang].clone());
        for (name, path) in &lc.rerankers {
            let sweep = parse_scorefile(config.resolve(path))
                .and_then(|scores| {
                    sweep_depth_with(
                        &best[lang],
                        &scores,
                        &data.qrels,
                        &config.rerank_depths,
                        config.metric,
                        config.gain,
                        exec,
                    )
                })
                .map_err(|e| e.in_stage("rerank"))?;
            let run = sweep.run.with_tag(format!("{name}@{}", sweep.best_depth));
            let artifact = format!("rerank-{name}");
            let detail = format!(
                "{name}@{} over {BEST_HYBRID}; head banded into [{HEAD_MIN}, {HEAD_MAX}], tail scaled by {TAIL_SCALE}",
                sweep.best_depth
            );
            st.write(
                lang,
                &format!("rerank/{name}.trec"),
                &artifact,
                detail,
                &run,
            )
            .and_then(|_| st.evaluate(lang, &artifact, &run, &data.qrels))
            .map_err(|e| e.in_stage("rerank"))?;
            st.summaries
                .entry(lang.clone())
                .or_default()
                .rerank_sweeps
                .insert(
                    name.clone(),
                    RerankSummary {
                        best_depth: sweep.best_depth,
                        values: sweep.values,
                    },
                );
            runs.insert(name.clone(), run);
        }
        final_inputs.insert(
            lang.clone(),
            LanguageInput {
                runs,
                qrels: Some(data.qrels.clone()),
                heldout_qrels: data.heldout.clone(),
            },
        );
    }

    // reranking hybrids
    let final_sel = per_language_selection(
        &final_inputs,
        &config.selection_mode.strategy(),
        config.metric,
        config.global_selection,
        &opts,
    )
    .map_err(|e| e.in_stage("final"))?;
    for (lang, sel) in &final_sel.languages {
        let run = sel.fused.clone();
        st.write(
            lang,
            "final.trec",
            "final",
            format!("selected {}", sel.selection.members.join("+")),
            &run,
        )
        .and_then(|_| st.evaluate(lang, "final", &run, &langs[lang].qrels))
        .map_err(|e| e.in_stage("final"))?;
    }

    // leaderboard
    let metric_name = config.metric.to_string();
    let mut artifacts: Vec<String> = Vec::new();
    for s in st.summaries.values() {
        for a in s.evaluations.keys() {
            if !artifacts.contains(a) {
                artifacts.push(a.clone());
            }
        }
    }
    let rank = |a: &str| match a {
        ALL_HYBRID => 1,
        BEST_HYBRID => 3,
        "final" => 5,
        _ if a.starts_with("hybrid-") => 2,
        _ if a.starts_with("rerank-") => 4,
        _ => 0,
    };
    artifacts.sort_by(|a, b| rank(a).cmp(&rank(b)).then(a.cmp(b)));
    let mut leaderboard = Leaderboard::new(format!("{metric_name} (x100)"));
    for a in &artifacts {
        leaderboard.push(
            a.clone(),
            scaled(st.summaries.iter().filter_map(|(lang, s)| {
                s.evaluations
                    .get(a)
                    .and_then(|m| m.get(&metric_name))
                    .map(|v| (lang.clone(), *v))
            })),
        );
    }

    // write
    let write_all = |st: &Stage| -> Result<()> {
        write_text(&st.out.join("leaderboard.tsv"), &leaderboard.render()?)?;
        for (lang, s) in &st.summaries {
            let mut tsv = String::from("artifact");
            for m in &st.report_metrics {
                tsv.push_str(&format!("\t{m}"));
            }
            tsv.push('\n');
            for (a, vals) in &s.evaluations {
                tsv.push_str(a);
                for m in &st.report_metrics {
                    tsv.push_str(&format!(
                        "\t{:.6}",
                        vals.get(&m.to_string()).copied().unwrap_or(0.0)
                    ));
                }
                tsv.push('\n');
            }
            write_text(&st.out.join(lang).join("eval.tsv"), &tsv)?;
        }
        write_text(
            &st.out.join("selection.json"),
            &(serde_json::to_string_pretty(&first_sel)? + "\n"),
        )?;
        write_text(
            &st.out.join("final_selection.json"),
            &(serde_json::to_string_pretty(&final_sel)? + "\n"),
        )?;
        write_text(
            &st.out.join("manifest.json"),
            &(serde_json::to_string_pretty(&st.manifest)? + "\n"),
        )?;
        Ok(())
    };
    write_all(&st).map_err(|e| e.in_stage("write"))?;

    let summary = PipelineSummary {
        config_hash: st.hash.clone(),
        metric: config.metric,
        languages: st.summaries,
        first_stage_selection: first_sel,
        final_selection: final_sel,
        leaderboard,
    };
    write_text(
        &st.out.join("summary.json"),
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )
    .map_err(|e| e.in_stage("write"))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_missing_paths() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = r#"{"output_dir":"out","languages":{"fr":{"qrels":"nope.qrels","runs":{"a":"a.trec"}}}}"#;
        std::fs::write(dir.path().join("c.json"), cfg).unwrap();
        let err = ExperimentConfig::load(dir.path().join("c.json")).unwrap_err();
        assert!(err.to_string().contains("nope.qrels"), "{err}");

        std::fs::write(dir.path().join("nope.qrels"), "q 0 d 1\n").unwrap();
        std::fs::write(dir.path().join("a.trec"), "q Q0 d 1 1 a\n").unwrap();
        let c = ExperimentConfig::load(dir.path().join("c.json")).unwrap();
        assert_eq!(c.metric, Metric::ndcg(10));
        assert_eq!(c.rerank_depths, [10, 20, 100]);
        assert_eq!(c.fusion_depth, 1000);
    }

    #[test]
    fn bad_metric_is_rejected() {
        let cfg = r#"{"output_dir":"o","metric":"map@10","languages":{}}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(cfg).is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::new("out", BTreeMap::new());
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.fusion_depth = 10;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 12);
    }
}
