use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fusekit::analysis::{
    cross_run_presence, export_annotation_pool, extract_unjudged_top, judged_profile, profile_tsv,
};
use fusekit::fusion::{fuse_runs, DEFAULT_FUSION_DEPTH};
use fusekit::leaderboard::Leaderboard;
use fusekit::metrics::evaluate;
use fusekit::model::{
    parse_corpus, parse_dense_vectors, parse_multi_vectors, parse_qrels, parse_queries, parse_run,
    parse_scorefile, parse_sparse_vectors, write_run, ParseOptions,
};
use fusekit::pipeline::{run_pipeline, ExperimentConfig, SelectionMode};
use fusekit::rerank::{apply_reranker, sweep_depth, DEFAULT_DEPTHS};
use fusekit::retrievers::{
    bm25_search, build_index, dense_search, maxsim_search, run_from_queries, Bm25Params,
    InvertedIndex, Similarity, SparseIndex,
};
use fusekit::sweep::{per_language_selection, LanguageInput, SearchOptions, Strategy};
use fusekit::synth::{write_synthetic, QualityProfile, SynthSpec};
use fusekit::{Execution, Gain, Metric, Run};

#[derive(Parser)]
#[command(
    name = "fusekit",
    version,
    about = "Retrieval fusion, evaluation and ensemble search"
)]
struct Cli {
    /// Worker threads for per-query and per-subset work (default: all cores).
    #[arg(long, global = true, env = "FUSEKIT_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a BM25 inverted index.
    Index {
        #[command(subcommand)]
        action: IndexAction,
    },
    /// Run a first-stage retriever over a query set.
    Search {
        #[command(subcommand)]
        retriever: SearchCommand,
    },
    /// Evaluate a run against qrels.
    Eval(EvalArgs),
    /// Fuse runs by summing min-max normalized scores.
    Fuse(FuseArgs),
    /// Apply reranker scores to a run.
    Rerank {
        #[command(subcommand)]
        action: RerankAction,
    },
    /// Search for the best ensemble of candidate runs.
    Sweep {
        #[command(subcommand)]
        action: SweepAction,
    },
    /// Judgment-coverage analysis.
    Analyze {
        #[command(subcommand)]
        action: AnalyzeAction,
    },
    /// Render a per-language table with a macro average.
    Leaderboard(LeaderboardArgs),
    /// Generate a seeded synthetic experiment.
    Synth(SynthArgs),
    /// Run the full experiment described by a config.
    Pipeline(PipelineArgs),
}

#[derive(Subcommand)]
enum IndexAction {
    Build {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SearchOut {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    tag: Option<String>,
    #[arg(long, default_value_t = 1000)]
    k: usize,
}

#[derive(Subcommand)]
enum SearchCommand {
    Bm25 {
        /// Directory written by `index build`.
        #[arg(long)]
        index: PathBuf,
        /// Query TSV (`id<TAB>text`).
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, default_value_t = Bm25Params::default().k1)]
        k1: f64,
        #[arg(long, default_value_t = Bm25Params::default().b)]
        b: f64,
        #[command(flatten)]
        out: SearchOut,
    },
    Sparse {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[command(flatten)]
        out: SearchOut,
    },
    Dense {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, default_value = "dot")]
        similarity: Similarity,
        #[command(flatten)]
        out: SearchOut,
    },
    Maxsim {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[command(flatten)]
        out: SearchOut,
    },
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "ndcg@10,recall@100")]
    metrics: Vec<Metric>,
    #[arg(long, default_value = "linear")]
    gain: Gain,
    /// Print per-query rows as well as the means.
    #[arg(long)]
    per_query: bool,
    /// Write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long, num_args = 1.., required = true)]
    runs: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    weights: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "hybrid")]
    tag: String,
    #[arg(long, default_value_t = DEFAULT_FUSION_DEPTH)]
    depth: usize,
}

#[derive(Subcommand)]
enum RerankAction {
    Apply {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        tag: Option<String>,
    },
    Sweep {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_DEPTHS)]
        depths: Vec<usize>,
        #[arg(long, default_value = "ndcg@10")]
        metric: Metric,
        #[arg(long, default_value = "linear")]
        gain: Gain,
        /// Write the run reranked at the best depth.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exhaustive,
    Greedy,
    Fixed,
}

#[derive(Subcommand)]
enum SweepAction {
    Subsets {
        /// Experiment config; each language's `runs` are the candidates.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "exhaustive")]
        mode: ModeArg,
        /// Members for `--mode fixed`.
        #[arg(long, value_delimiter = ',')]
        members: Vec<String>,
        #[arg(long)]
        metric: Option<Metric>,
        /// Pick one subset for all languages by macro average.
        #[arg(long)]
        global: bool,
        #[arg(long)]
        out: PathBuf,
        /// Also write each language's fused selection here.
        #[arg(long)]
        runs_dir: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum AnalyzeAction {
    Judged {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, value_delimiter = ',', default_value = "100")]
        recall: Vec<usize>,
    },
    Unjudged {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long, default_value_t = 1)]
        n_top: usize,
        /// Reference run for pooling presence.
        #[arg(long, requires = "ref_depth")]
        r#ref: Option<PathBuf>,
        /// Depth of the reference run to search; required with `--ref`.
        #[arg(long)]
        ref_depth: Option<usize>,
        #[arg(long, requires = "out")]
        corpus: Option<PathBuf>,
        #[arg(long)]
        queries: Option<PathBuf>,
        /// Annotation pool TSV (needs `--corpus`).
        #[arg(long, requires = "corpus")]
        out: Option<PathBuf>,
        /// Write the full report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Args)]
struct LeaderboardArgs {
    /// JSON object: row name → language → value.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "nDCG@10")]
    label: String,
    /// Multiply every value, e.g. 100 for fractions.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    docs: usize,
    #[arg(long, default_value_t = 50)]
    queries: usize,
    #[arg(long, default_value_t = 3)]
    systems: usize,
    #[arg(long, default_value = "mid")]
    profile: QualityProfile,
    #[arg(long, value_delimiter = ',', default_value = "xx")]
    languages: Vec<String>,
    #[arg(long, default_value_t = 1)]
    rerankers: usize,
    #[arg(long, default_value_t = 0.0)]
    heldout: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    metric: Option<Metric>,
    #[arg(long)]
    gain: Option<Gain>,
    #[arg(long)]
    mode: Option<SelectionMode>,
    #[arg(long)]
    global: bool,
    #[arg(long, value_delimiter = ',')]
    depths: Option<Vec<usize>>,
    #[arg(long)]
    fusion_depth: Option<usize>,
}

fn load_run(path: &Path) -> Result<Run> {
    Ok(parse_run(path, ParseOptions::default())?)
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

fn search(cmd: SearchCommand) -> Result<()> {
    let exec = Execution::default();
    let (run, out) = match cmd {
        SearchCommand::Bm25 {
            index,
            queries,
            k1,
            b,
            out,
        } => {
            let index = InvertedIndex::load(&index)?;
            let params = Bm25Params::new(k1, b)?;
            let qs = parse_queries(&queries)?;
            let tag = out.tag.clone().unwrap_or_else(|| "bm25".into());
            (
                run_from_queries(&tag, &qs.queries, exec, |q| {
                    bm25_search(&index, q, params, out.k)
                })?,
                out,
            )
        }
        SearchCommand::Sparse { docs, queries, out } => {
            let index = SparseIndex::new(&parse_sparse_vectors(&docs)?);
            let qs = parse_sparse_vectors(&queries)?;
            let tag = out.tag.clone().unwrap_or_else(|| "sparse".into());
            (
                run_from_queries(&tag, &qs.vectors, exec, |q| index.search(q, out.k))?,
                out,
            )
        }
        SearchCommand::Dense {
            docs,
            queries,
            similarity,
            out,
        } => {
            let d = parse_dense_vectors(&docs, None)?;
            let qs = parse_dense_vectors(&queries, Some(d.dim))?;
            let tag = out.tag.clone().unwrap_or_else(|| "dense".into());
            (
                run_from_queries(&tag, &qs.vectors, exec, |q| {
                    dense_search(&d, q, out.k, similarity)
                })?,
                out,
            )
        }
        SearchCommand::Maxsim { docs, queries, out } => {
            let d = parse_multi_vectors(&docs, None)?;
            let qs = parse_multi_vectors(&queries, (d.dim > 0).then_some(d.dim))?;
            let tag = out.tag.clone().unwrap_or_else(|| "maxsim".into());
            (
                run_from_queries(&tag, &qs.vectors, exec, |q| maxsim_search(&d, q, out.k))?,
                out,
            )
        }
    };
    write_run(&run, &out.out, run.tag())?;
    log::info!(
        "wrote {} queries to {}",
        run.num_queries(),
        out.out.display()
    );
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let run = load_run(&args.run)?;
    let qrels = parse_qrels(&args.qrels)?;
    let report = evaluate(&run, &qrels, &args.metrics, args.gain)?;
    if args.per_query {
        print!("{}", report.to_tsv());
    } else {
        for m in &args.metrics {
            println!("{m}\t{:.4}", report.value(*m).unwrap_or(0.0));
        }
    }
    if let Some(path) = args.json {
        write_json(&path, &report)?;
    }
    Ok(())
}

fn fuse(args: FuseArgs) -> Result<()> {
    let weights = if args.weights.is_empty() {
        vec![1.0; args.runs.len()]
    } else {
        args.weights
    };
    if weights.len() != args.runs.len() {
        bail!(
            "{} weights given for {} runs",
            weights.len(),
            args.runs.len()
        );
    }
    let runs = args
        .runs
        .iter()
        .map(|p| load_run(p))
        .collect::<Result<Vec<_>>>()?;
    let members: Vec<(&Run, f64)> = runs.iter().zip(weights).collect();
    let fused = fuse_runs(&members, &args.tag, args.depth, Execution::default())?;
    write_run(&fused, &args.out, &args.tag)?;
    Ok(())
}

fn rerank(action: RerankAction) -> Result<()> {
    match action {
        RerankAction::Apply {
            run,
            scores,
            depth,
            out,
            tag,
        } => {
            let first = load_run(&run)?;
            let reranked = apply_reranker(&first, &parse_scorefile(&scores)?, depth)?;
            let tag = tag
                .unwrap_or_else(|| format!("{}.{}@{depth}", file_stem(&run), file_stem(&scores)));
            write_run(&reranked, &out, &tag)?;
        }
        RerankAction::Sweep {
            run,
            scores,
            qrels,
            depths,
            metric,
            gain,
            out,
        } => {
            let first = load_run(&run)?;
            let sweep = sweep_depth(
                &first,
                &parse_scorefile(&scores)?,
                &parse_qrels(&qrels)?,
                &depths,
                metric,
                gain,
            )?;
            for (d, v) in &sweep.values {
                let mark = if *d == sweep.best_depth { "\tbest" } else { "" };
                println!("{d}\t{metric}\t{v:.4}{mark}");
            }
            if let Some(out) = out {
                let tag = format!(
                    "{}.{}@{}",
                    file_stem(&run),
                    file_stem(&scores),
                    sweep.best_depth
                );
                write_run(&sweep.run, &out, &tag)?;
            }
        }
    }
    Ok(())
}

fn sweep(action: SweepAction) -> Result<()> {
    let SweepAction::Subsets {
        config,
        mode,
        members,
        metric,
        global,
        out,
        runs_dir,
    } = action;
    let config = ExperimentConfig::load(&config)?;
    let metric = metric.unwrap_or(config.metric);
    let strategy = match mode {
        ModeArg::Exhaustive => Strategy::Exhaustive,
        ModeArg::Greedy => Strategy::Greedy,
        ModeArg::Fixed if members.is_empty() => bail!("--mode fixed needs --members"),
        ModeArg::Fixed => Strategy::Fixed(members),
    };
    let mut inputs = BTreeMap::new();
    for (lang, lc) in &config.languages {
        let runs = lc
            .runs
            .iter()
            .map(|(name, p)| {
                Ok((
                    name.clone(),
                    load_run(&config.resolve(p))?.with_tag(name.clone()),
                ))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        let heldout_qrels = lc
            .heldout_qrels
            .as_ref()
            .map(|p| parse_qrels(config.resolve(p)))
            .transpose()?;
        let qrels = Some(parse_qrels(config.resolve(&lc.qrels))?);
        inputs.insert(
            lang.clone(),
            LanguageInput {
                runs,
                qrels,
                heldout_qrels,
            },
        );
    }
    let opts = SearchOptions {
        gain: config.gain,
        fusion_depth: config.fusion_depth,
        exec: Execution::default(),
    };
    let selection = per_language_selection(
        &inputs,
        &strategy,
        metric,
        global || config.global_selection,
        &opts,
    )?;
    for (lang, s) in &selection.languages {
        println!(
            "{lang}\t{}\t{:.4}",
            s.selection.members.join("+"),
            s.selection.value
        );
        if let Some(dir) = &runs_dir {
            write_run(&s.fused, dir.join(format!("{lang}.trec")), s.fused.tag())?;
        }
    }
    for lang in &selection.skipped {
        println!("{lang}\tskipped (no qrels)");
    }
    println!("macro\t{:.4}", selection.macro_value);
    write_json(&out, &selection)
}

fn analyze(action: AnalyzeAction) -> Result<()> {
    match action {
        AnalyzeAction::Judged {
            runs,
            qrels,
            k,
            recall,
        } => {
            let qrels = parse_qrels(&qrels)?;
            let mut named = BTreeMap::new();
            for p in &runs {
                if named.insert(file_stem(p), load_run(p)?).is_some() {
                    bail!("two runs share the name {}", file_stem(p));
                }
            }
            print!(
                "{}",
                profile_tsv(&judged_profile(&named, &qrels, k, &recall)?, k)
            );
        }
        AnalyzeAction::Unjudged {
            run,
            qrels,
            n_top,
            r#ref,
            ref_depth,
            corpus,
            queries,
            out,
            json,
        } => {
            let mut report = extract_unjudged_top(&load_run(&run)?, &parse_qrels(&qrels)?, n_top)?;
            if let Some(reference) = r#ref {
                let depth = ref_depth.expect("clap enforces --ref-depth");
                report = cross_run_presence(&report, &load_run(&reference)?, depth)?;
            }
            let c = &report.counts;
            println!("top1_positive\t{}", c.positive);
            println!("top1_known_negative\t{}", c.known_negative);
            println!("top1_unjudged\t{}", c.unjudged);
            println!("queries_with_unjudged\t{}", report.queries.len());
            if let (Some(corpus), Some(out)) = (corpus, out) {
                let corpus = parse_corpus(&corpus)?;
                let queries = queries.map(|q| parse_queries(&q)).transpose()?;
                export_annotation_pool(&report, &corpus, queries.as_ref(), &out)?;
            }
            if let Some(path) = json {
                write_json(&path, &report)?;
            }
        }
    }
    Ok(())
}

fn leaderboard(args: LeaderboardArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let rows: BTreeMap<String, BTreeMap<String, f64>> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", args.input.display()))?;
    let mut table = Leaderboard::new(args.label);
    for (name, values) in rows {
        table.push(
            name,
            values
                .into_iter()
                .map(|(l, v)| (l, v * args.scale))
                .collect(),
        );
    }
    print!("{}", table.render()?);
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut spec = SynthSpec::new(
        args.seed,
        args.docs,
        args.queries,
        args.systems,
        args.profile,
    );
    spec.languages = args.languages;
    spec.n_rerankers = args.rerankers;
    spec.heldout_fraction = args.heldout;
    write_synthetic(&spec, &args.out)?;
    println!("{}", args.out.join("config.json").display());
    Ok(())
}

fn pipeline(args: PipelineArgs) -> Result<()> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(dir) = args.output_dir {
        config.output_dir = std::path::absolute(dir)?;
    }
    if let Some(m) = args.metric {
        config.metric = m;
    }
    if let Some(g) = args.gain {
        config.gain = g;
    }
    if let Some(m) = args.mode {
        config.selection_mode = m;
    }
    config.global_selection |= args.global;
    if let Some(d) = args.depths {
        config.rerank_depths = d;
    }
    if let Some(d) = args.fusion_depth {
        config.fusion_depth = d;
    }
    let summary = run_pipeline(&config)?;
    print!("{}", summary.leaderboard.render()?);
    log::info!(
        "outputs in {} (config {})",
        config.output_path().display(),
        summary.config_hash
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be >= 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match cli.command {
        Command::Index {
            action: IndexAction::Build { corpus, out },
        } => {
            let index = build_index(&parse_corpus(&corpus)?)?;
            index.save(&out)?;
            println!("{} docs, {} terms", index.num_docs(), index.terms().count());
        }
        Command::Search { retriever } => search(retriever)?,
        Command::Eval(a) => eval(a)?,
        Command::Fuse(a) => fuse(a)?,
        Command::Rerank { action } => rerank(action)?,
        Command::Sweep { action } => sweep(action)?,
        Command::Analyze { action } => analyze(action)?,
        Command::Leaderboard(a) => leaderboard(a)?,
        Command::Synth(a) => synth(a)?,
        Command::Pipeline(a) => pipeline(a)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
