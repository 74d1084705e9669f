use std::error::Error as _;

use fusekit::model::{parse_scorefile, write_scorefile, ScoreFile};
use fusekit::pipeline::{run_pipeline, ExperimentConfig, SelectionMode};
use fusekit::synth::{write_synthetic, QualityProfile, SynthSpec};

fn spec() -> SynthSpec {
    let mut s = SynthSpec::new(11, 400, 30, 3, QualityProfile::Mixed);
    s.languages = vec!["de".into(), "yo".into()];
    s.n_rerankers = 2;
    s.heldout_fraction = 0.3;
    s
}

#[test]
fn multilingual_run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    write_synthetic(&spec(), dir.path()).unwrap();
    let config = ExperimentConfig::load(dir.path().join("config.json")).unwrap();
    let summary = run_pipeline(&config).unwrap();

    let out = dir.path().join("out");
    for f in [
        "leaderboard.tsv",
        "selection.json",
        "final_selection.json",
        "summary.json",
        "manifest.json",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    for lang in ["de", "yo"] {
        for f in [
            "final.trec",
            "eval.tsv",
            "hybrids/hybrid_best.trec",
            "hybrids/hybrid_all.trec",
            "rerank/oracle.trec",
        ] {
            assert!(out.join(lang).join(f).is_file(), "{lang}/{f}");
        }
        let evals = &summary.languages[lang].evaluations;
        let best = summary.first_stage_selection.languages[lang]
            .selection
            .value;
        // the final search may pick hybrid_best alone, so it never loses to it
        assert!(evals["final"]["ndcg@10"] >= best);
        assert!(summary.first_stage_selection.languages[lang]
            .heldout_value
            .is_some());
    }
    let table = std::fs::read_to_string(out.join("leaderboard.tsv")).unwrap();
    let header = table.lines().next().unwrap();
    assert_eq!(header, "ndcg@10 (x100)\tAverage\tde\tyo");
    assert!(table.lines().last().unwrap().starts_with("final\t"));

    let first = std::fs::read_to_string(out.join("de/final.trec")).unwrap();
    let tag = first
        .lines()
        .next()
        .unwrap()
        .split(' ')
        .next_back()
        .unwrap();
    assert!(tag.starts_with("best:ndcg@10:"), "{tag}");
    assert!(
        tag.ends_with(&format!(".cfg-{}", summary.config_hash)),
        "{tag}"
    );
}

#[test]
fn greedy_global_mode_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = write_synthetic(&spec(), dir.path())
        .unwrap()
        .with_base_dir(dir.path());
    config.selection_mode = SelectionMode::Greedy;
    config.global_selection = true;
    let summary = run_pipeline(&config).unwrap();
    assert_eq!(summary.first_stage_selection.scope, "global");
    let sel = &summary.first_stage_selection.languages;
    assert_eq!(sel["de"].selection.members, sel["yo"].selection.members);
}

#[test]
fn missing_reranker_scores_name_the_stage_and_query() {
    let dir = tempfile::tempdir().unwrap();
    write_synthetic(&spec(), dir.path()).unwrap();
    let path = dir.path().join("de/rerank/oracle.txt");
    let full = parse_scorefile(&path).unwrap();
    let mut partial = ScoreFile::new();
    for (q, d, s) in full.sorted_pairs() {
        if q != "q0003" {
            partial.insert(q, d, s).unwrap();
        }
    }
    write_scorefile(&partial, &path).unwrap();
    let config = ExperimentConfig::load(dir.path().join("config.json")).unwrap();
    let err = run_pipeline(&config).unwrap_err();
    assert!(err.to_string().contains("rerank"), "{err}");
    assert!(err.source().unwrap().to_string().contains("q0003"), "{err}");
}

#[test]
fn missing_file_is_reported_before_running() {
    let dir = tempfile::tempdir().unwrap();
    write_synthetic(&spec(), dir.path()).unwrap();
    std::fs::remove_file(dir.path().join("yo/dense_docs.jsonl")).unwrap();
    let err = ExperimentConfig::load(dir.path().join("config.json")).unwrap_err();
    assert!(err.to_string().contains("dense_docs.jsonl"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn fixed_hybrid_with_unknown_member_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = write_synthetic(&spec(), dir.path())
        .unwrap()
        .with_base_dir(dir.path());
    config
        .languages
        .get_mut("de")
        .unwrap()
        .fixed_hybrids
        .insert("h0".into(), vec!["bm25".into(), "nope".into()]);
    assert!(config.validate().unwrap_err().to_string().contains("nope"));
}
