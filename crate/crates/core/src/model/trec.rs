//! Whitespace-separated TREC formats: runs, qrels and reranker score files.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use super::{read_text, strip_bom, write_text, Qrels, Run, ScoreFile, ScoredDoc};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Keep the first occurrence of a duplicate (query, doc) pair instead of
    /// failing.
    pub lenient_duplicates: bool,
}

fn parse_score(path: &Path, line: usize, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::parse(path, line, format!("non-numeric score `{field}`")))?;
    if !v.is_finite() {
        return Err(Error::parse(
            path,
            line,
            format!("non-finite score `{field}`"),
        ));
    }
    Ok(v)
}

pub fn parse_run(path: impl AsRef<Path>, opts: ParseOptions) -> Result<Run> {
    let path = path.as_ref();
    parse_run_str(&read_text(path)?, path, opts)
}

/// Parses `qid Q0 docid rank score tag` lines. The rank column is ignored;
/// scores define the order.
pub fn parse_run_str(text: &str, path: impl AsRef<Path>, opts: ParseOptions) -> Result<Run> {
    let path = path.as_ref();
    let text = strip_bom(text.to_string());
    let mut entries: BTreeMap<String, Vec<ScoredDoc>> = BTreeMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut tag: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 6 columns, found {}", cols.len()),
            ));
        }
        let (qid, docid) = (cols[0], cols[2]);
        cols[3]
            .parse::<i64>()
            .map_err(|_| Error::parse(path, lineno, format!("non-integer rank `{}`", cols[3])))?;
        let score = parse_score(path, lineno, cols[4])?;
        if !seen.insert((qid.to_string(), docid.to_string())) {
            if opts.lenient_duplicates {
                log::warn!(
                    "{}:{lineno}: duplicate ({qid}, {docid}) ignored",
                    path.display()
                );
                continue;
            }
            return Err(Error::parse(
                path,
                lineno,
                format!("duplicate entry for query {qid}, doc {docid}"),
            ));
        }
        match &tag {
            None => tag = Some(cols[5].to_string()),
            Some(t) if t != cols[5] => {
                log::debug!("{}:{lineno}: mixed run tags, keeping `{t}`", path.display())
            }
            _ => {}
        }
        entries
            .entry(qid.to_string())
            .or_default()
            .push(ScoredDoc::new(docid, score));
    }
    Run::new(tag.unwrap_or_default(), entries)
}

fn check_token(what: &str, s: &str) -> Result<()> {
    if s.is_empty() || s.chars().any(char::is_whitespace) {
        return Err(Error::InvalidData(format!(
            "{what} `{s}` is empty or contains whitespace"
        )));
    }
    Ok(())
}

/// Renders a run as 6-column TREC text, queries ascending, ranks 1..n,
/// scores with 6 decimals.
pub fn format_run(run: &Run, tag: &str) -> Result<String> {
    check_token("run tag", tag)?;
    let mut out = String::new();
    for (qid, docs) in run.iter() {
        check_token("query id", qid)?;
        for (rank, d) in docs.iter().enumerate() {
            check_token("doc id", &d.doc_id)?;
            writeln!(
                out,
                "{qid} Q0 {} {} {:.6} {tag}",
                d.doc_id,
                rank + 1,
                d.score
            )
            .expect("write to String");
        }
    }
    Ok(out)
}

pub fn write_run(run: &Run, path: impl AsRef<Path>, tag: &str) -> Result<()> {
    write_text(path.as_ref(), &format_run(run, tag)?)
}

pub fn parse_qrels(path: impl AsRef<Path>) -> Result<Qrels> {
    let path = path.as_ref();
    parse_qrels_str(&read_text(path)?, path)
}

/// Parses `qid 0 docid grade` lines. Negative grades are clamped to 0.
pub fn parse_qrels_str(text: &str, path: impl AsRef<Path>) -> Result<Qrels> {
    let path = path.as_ref();
    let text = strip_bom(text.to_string());
    let mut raw: BTreeMap<String, BTreeMap<String, i64>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 4 columns, found {}", cols.len()),
            ));
        }
        let grade: i64 = cols[3]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("non-integer grade `{}`", cols[3])))?;
        if grade > u32::MAX as i64 {
            return Err(Error::parse(
                path,
                lineno,
                format!("grade {grade} out of range"),
            ));
        }
        match raw
            .entry(cols[0].to_string())
            .or_default()
            .entry(cols[2].to_string())
        {
            Entry::Vacant(v) => {
                v.insert(grade);
            }
            Entry::Occupied(o) if *o.get() == grade => {}
            Entry::Occupied(o) => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!(
                        "conflicting grades {} and {grade} for query {}, doc {}",
                        o.get(),
                        cols[0],
                        cols[2]
                    ),
                ))
            }
        }
    }
    let judgments = raw
        .into_iter()
        .map(|(q, docs)| {
            let docs = docs
                .into_iter()
                .map(|(d, g)| {
                    if g < 0 {
                        log::warn!(
                            "{}: negative grade {g} for query {q}, doc {d} clamped to 0",
                            path.display()
                        );
                    }
                    (d, g.max(0) as u32)
                })
                .collect();
            (q, docs)
        })
        .collect();
    Ok(Qrels::new(judgments))
}

pub fn write_qrels(qrels: &Qrels, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for (qid, docs) in qrels.iter() {
        check_token("query id", qid)?;
        for (doc, grade) in docs {
            check_token("doc id", doc)?;
            writeln!(out, "{qid} 0 {doc} {grade}").expect("write to String");
        }
    }
    write_text(path.as_ref(), &out)
}

/// Parses `qid docid score` lines.
pub fn parse_scorefile(path: impl AsRef<Path>) -> Result<ScoreFile> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut scores = ScoreFile::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 3 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 3 columns, found {}", cols.len()),
            ));
        }
        let score = parse_score(path, lineno, cols[2])?;
        scores
            .insert(cols[0], cols[1], score)
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
    }
    Ok(scores)
}

pub fn write_scorefile(scores: &ScoreFile, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for (q, d, s) in scores.sorted_pairs() {
        writeln!(out, "{q} {d} {s:.6}").expect("write to String");
    }
    write_text(path.as_ref(), &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> Result<Run> {
        parse_run_str(text, "mem", ParseOptions::default())
    }

    #[test]
    fn single_line_maps_fields() {
        let r = run("q1 Q0 d7 1 12.5 bm25\n").unwrap();
        assert_eq!(r.tag(), "bm25");
        assert_eq!(r.query("q1").unwrap(), &[ScoredDoc::new("d7", 12.5)]);
    }

    #[test]
    fn rank_column_is_ignored() {
        let r = run("q1 Q0 a 1 3.0 t\nq1 Q0 b 2 9.0 t\n").unwrap();
        let ids: Vec<_> = r
            .query("q1")
            .unwrap()
            .iter()
            .map(|d| &d.doc_id[..])
            .collect();
        assert_eq!(ids, ["b", "a"]);
    }

    #[test]
    fn equal_scores_tie_break_on_doc_id() {
        let r = run("q1 Q0 dB 1 5 t\nq1 Q0 dA 2 5 t\n").unwrap();
        assert_eq!(r.query("q1").unwrap()[0].doc_id, "dA");
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let err = run("q1 Q0 d 1 1.0 t\nq1 Q0 d2 2 1.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = run("q1 Q0 d 1 abc t\n").unwrap_err();
        assert!(err.to_string().contains("non-numeric"));
        assert!(run("q1 Q0 d 1 NaN t\n").is_err());
        assert!(run("q1 Q0 d 1 inf t\n").is_err());
    }

    #[test]
    fn duplicates_strict_and_lenient() {
        let text = "q1 Q0 d 1 2.0 t\nq1 Q0 d 2 1.0 t\n";
        assert!(run(text).is_err());
        let r = parse_run_str(
            text,
            "mem",
            ParseOptions {
                lenient_duplicates: true,
            },
        )
        .unwrap();
        assert_eq!(r.query("q1").unwrap(), &[ScoredDoc::new("d", 2.0)]);
    }

    #[test]
    fn format_uses_six_decimals() {
        let r = run("q1 Q0 d7 1 12.5 bm25\n").unwrap();
        assert_eq!(format_run(&r, "tag").unwrap(), "q1 Q0 d7 1 12.500000 tag\n");
        assert_eq!(format_run(&Run::empty("x"), "tag").unwrap(), "");
        assert!(format_run(&r, "bad tag").is_err());
    }

    #[test]
    fn qrels_clamp_and_duplicates() {
        let q = parse_qrels_str("q1 0 d7 1\n", "mem").unwrap();
        assert_eq!(q.grade("q1", "d7"), Some(1));
        let q = parse_qrels_str("q1 0 d7 -1\n", "mem").unwrap();
        assert_eq!(q.grade("q1", "d7"), Some(0));
        let q = parse_qrels_str("q1 0 d7 1\nq1 0 d7 1\n", "mem").unwrap();
        assert_eq!(q.query("q1").unwrap().len(), 1);
        assert!(parse_qrels_str("q1 0 d7 1\nq1 0 d7 2\n", "mem").is_err());
        assert!(parse_qrels_str("q1 0 d7\n", "mem").is_err());
    }

    #[test]
    fn bom_prefixed_run_parses() {
        let r = run("\u{feff}q1 Q0 d7 1 12.5 bm25\n").unwrap();
        assert!(r.contains_query("q1"));
    }
}
