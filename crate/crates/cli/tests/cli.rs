use std::path::Path;
use std::process::{Command, Output};

fn fusekit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fusekit"))
        .args(args)
        .current_dir(cwd)
        .env_remove("FUSEKIT_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = fusekit(args, cwd);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fail(args: &[&str], cwd: &Path) -> String {
    let out = fusekit(args, cwd);
    assert!(!out.status.success(), "{args:?} should fail");
    String::from_utf8(out.stderr).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn index_search_eval() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    write(
        p,
        "c.jsonl",
        "{\"docid\":\"d1\",\"title\":\"\",\"text\":\"a b\"}\n{\"docid\":\"d2\",\"title\":\"\",\"text\":\"a\"}\n{\"docid\":\"d3\",\"title\":\"\",\"text\":\"c c c\"}\n",
    );
    write(p, "q.tsv", "q1\ta\n");
    write(p, "q.qrels", "q1 0 d2 1\nq1 0 d3 0\n");
    ok(
        &["index", "build", "--corpus", "c.jsonl", "--out", "idx"],
        p,
    );
    ok(
        &[
            "search",
            "bm25",
            "--index",
            "idx",
            "--queries",
            "q.tsv",
            "--out",
            "bm25.trec",
            "--k",
            "10",
        ],
        p,
    );
    let run = std::fs::read_to_string(p.join("bm25.trec")).unwrap();
    assert_eq!(run.lines().next().unwrap(), "q1 Q0 d2 1 0.519190 bm25");
    let report = ok(
        &[
            "eval",
            "--run",
            "bm25.trec",
            "--qrels",
            "q.qrels",
            "--metrics",
            "ndcg@10,judged@10",
        ],
        p,
    );
    assert_eq!(report, "ndcg@10\t1.0000\njudged@10\t0.5000\n");
}

#[test]
fn fuse_and_rerank() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    write(p, "a.trec", "q Q0 d1 1 3 a\nq Q0 d2 2 1 a\n");
    write(
        p,
        "b.trec",
        "q Q0 d1 1 10 b\nq Q0 d3 2 5 b\nq Q0 d2 3 0 b\n",
    );
    ok(
        &["fuse", "--runs", "a.trec", "b.trec", "--out", "h.trec"],
        p,
    );
    let fused = std::fs::read_to_string(p.join("h.trec")).unwrap();
    assert_eq!(
        fused,
        "q Q0 d1 1 2.000000 hybrid\nq Q0 d3 2 0.500000 hybrid\nq Q0 d2 3 0.000000 hybrid\n"
    );
    let err = fail(
        &[
            "fuse",
            "--runs",
            "a.trec",
            "b.trec",
            "--weights",
            "1",
            "--out",
            "x.trec",
        ],
        p,
    );
    assert!(err.contains("1 weights given for 2 runs"), "{err}");

    write(p, "rr.txt", "q d2 0.9\nq d3 0.1\n");
    ok(
        &[
            "rerank", "apply", "--run", "h.trec", "--scores", "rr.txt", "--depth", "2", "--out",
            "r.trec",
        ],
        p,
    );
    let rr: Vec<String> = std::fs::read_to_string(p.join("r.trec"))
        .unwrap()
        .lines()
        .map(|l| l.split(' ').nth(2).unwrap().to_string())
        .collect();
    // d1 has no reranker score, so it drops below the scored d3 in the head
    assert_eq!(rr, ["d3", "d1", "d2"]);
    write(p, "q.qrels", "q 0 d3 1\n");
    write(p, "rr2.txt", "q d1 0.1\nq d2 0.5\nq d3 0.9\n");
    let sweep = ok(
        &[
            "rerank", "sweep", "--run", "h.trec", "--scores", "rr2.txt", "--qrels", "q.qrels",
            "--depths", "1,2",
        ],
        p,
    );
    assert!(
        sweep
            .lines()
            .any(|l| l.starts_with("2\tndcg@10\t1.0000\tbest")),
        "{sweep}"
    );
}

#[test]
fn reranker_missing_a_query_fails_naming_it() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    write(p, "a.trec", "q1 Q0 d1 1 3 a\nq2 Q0 d1 1 3 a\n");
    write(p, "rr.txt", "q1 d1 0.5\n");
    let err = fail(
        &[
            "rerank", "apply", "--run", "a.trec", "--scores", "rr.txt", "--depth", "5", "--out",
            "x",
        ],
        p,
    );
    assert!(err.contains("q2"), "{err}");
}

#[test]
fn leaderboard_reproduces_macro_average() {
    let d = tempfile::tempdir().unwrap();
    write(
        d.path(),
        "t.json",
        r#"{"best": {"de": 74.4, "yo": 94.8}, "mono": {"yo": 39.8}}"#,
    );
    let table = ok(&["leaderboard", "--input", "t.json"], d.path());
    assert_eq!(
        table,
        "nDCG@10\tAverage\tde\tyo\nbest\t84.6\t74.4\t94.8\nmono\tn/a\tn/a\t39.8\n"
    );
}

#[test]
fn unjudged_reference_needs_depth() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    write(p, "a.trec", "q Q0 d9 1 3 a\nq Q0 d1 2 1 a\n");
    write(p, "q.qrels", "q 0 d1 1\n");
    let err = fail(
        &[
            "analyze", "unjudged", "--run", "a.trec", "--qrels", "q.qrels", "--ref", "a.trec",
        ],
        p,
    );
    assert!(err.contains("--ref-depth"), "{err}");
    let out = ok(
        &[
            "analyze",
            "unjudged",
            "--run",
            "a.trec",
            "--qrels",
            "q.qrels",
            "--ref",
            "a.trec",
            "--ref-depth",
            "200",
            "--json",
            "u.json",
        ],
        p,
    );
    assert!(out.contains("top1_unjudged\t1"), "{out}");
    let report = std::fs::read_to_string(p.join("u.json")).unwrap();
    assert!(report.contains("\"status\": \"present\""), "{report}");
    let profile = ok(
        &[
            "analyze", "judged", "--runs", "a.trec", "--qrels", "q.qrels", "--k", "10",
        ],
        p,
    );
    assert!(
        profile.lines().nth(1).unwrap().starts_with("a\t1\t0.5"),
        "{profile}"
    );
}

#[test]
fn synth_pipeline_and_subset_sweep() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(
        &[
            "synth",
            "--seed",
            "5",
            "--docs",
            "300",
            "--queries",
            "15",
            "--systems",
            "2",
            "--languages",
            "de,yo",
            "--out",
            "exp",
        ],
        p,
    );
    let board = ok(
        &["--threads", "2", "pipeline", "--config", "exp/config.json"],
        p,
    );
    assert!(
        board.starts_with("ndcg@10 (x100)\tAverage\tde\tyo\n"),
        "{board}"
    );
    assert!(board.lines().last().unwrap().starts_with("final\t"));
    ok(
        &[
            "pipeline",
            "--config",
            "exp/config.json",
            "--output-dir",
            "again",
        ],
        p,
    );
    for f in [
        "de/final.trec",
        "yo/hybrids/hybrid_best.trec",
        "selection.json",
    ] {
        let a = std::fs::read(p.join("exp/out").join(f)).unwrap();
        let b = std::fs::read(p.join("again").join(f)).unwrap();
        // the output dir is part of the config hash carried in run tags
        if f.ends_with(".trec") {
            let strip = |x: &[u8]| {
                String::from_utf8_lossy(x)
                    .lines()
                    .map(|l| l.rsplit_once('.').unwrap().0.to_string())
                    .collect::<Vec<_>>()
            };
            assert_eq!(strip(&a), strip(&b), "{f}");
        } else {
            assert_eq!(a, b, "{f}");
        }
    }

    let out = ok(
        &[
            "sweep",
            "subsets",
            "--config",
            "exp/config.json",
            "--mode",
            "greedy",
            "--out",
            "sel.json",
        ],
        p,
    );
    assert!(out.lines().last().unwrap().starts_with("macro\t"), "{out}");
    let sel: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("sel.json")).unwrap()).unwrap();
    assert_eq!(sel["mode"], "greedy");
    let err = fail(
        &[
            "sweep",
            "subsets",
            "--config",
            "exp/config.json",
            "--mode",
            "fixed",
            "--out",
            "f.json",
        ],
        p,
    );
    assert!(err.contains("--members"), "{err}");
}

#[test]
fn bm25_only_config() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    write(
        p,
        "c.jsonl",
        "{\"docid\":\"d1\",\"title\":\"x\",\"text\":\"apple pie\"}\n{\"docid\":\"d2\",\"title\":\"y\",\"text\":\"pear\"}\n",
    );
    write(p, "q.tsv", "q1\tapple\nq2\tpear tart\n");
    write(p, "q.qrels", "q1 0 d1 1\nq2 0 d2 1\n");
    write(
        p,
        "cfg.json",
        r#"{"output_dir":"out","languages":{"en":{"corpus":"c.jsonl","queries":"q.tsv","qrels":"q.qrels","retrievers":[{"kind":"bm25","name":"bm25"}]}}}"#,
    );
    let board = ok(&["pipeline", "--config", "cfg.json"], p);
    assert!(board.contains("bm25\t100.0\t100.0"), "{board}");
    assert!(p.join("out/en/first_stage/bm25.trec").is_file());
    assert!(p.join("out/en/eval.tsv").is_file());
}

#[test]
fn config_errors_exit_nonzero() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    write(
        p,
        "cfg.json",
        r#"{"output_dir":"out","languages":{"en":{"qrels":"gone.qrels","runs":{"a":"a.trec"}}}}"#,
    );
    let err = fail(&["pipeline", "--config", "cfg.json"], p);
    assert!(err.contains("gone.qrels"), "{err}");

    write(p, "a.trec", "q1 Q0 d1 1 3 a\n");
    write(p, "gone.qrels", "q9 0 d1 1\n");
    let err = fail(&["pipeline", "--config", "cfg.json"], p);
    assert!(err.contains("stage `evaluate` failed"), "{err}");
}
