//! JSON-lines corpora and vector files, and tab-separated query files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    read_text, write_text, Corpus, DenseVectorSet, Document, MultiVectorSet, QuerySet,
    SparseVectorSet,
};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct CorpusRecord {
    docid: String,
    title: String,
    text: String,
}

#[derive(Serialize, Deserialize)]
struct SparseRecord {
    id: String,
    vector: BTreeMap<String, f64>,
}

#[derive(Serialize, Deserialize)]
struct DenseRecord {
    id: String,
    vector: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MultiRecord {
    id: String,
    vectors: Vec<Vec<f64>>,
}

/// Deserializes one record per non-empty line.
fn records<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec =
            serde_json::from_str(line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        out.push((i + 1, rec));
    }
    Ok(out)
}

fn insert_unique<V>(
    map: &mut BTreeMap<String, V>,
    id: String,
    value: V,
    path: &Path,
    line: usize,
) -> Result<()> {
    if map.contains_key(&id) {
        return Err(Error::parse(path, line, format!("duplicate id `{id}`")));
    }
    map.insert(id, value);
    Ok(())
}

pub fn parse_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let mut docs = BTreeMap::new();
    for (line, rec) in records::<CorpusRecord>(path)? {
        let doc = Document {
            title: rec.title,
            text: rec.text,
        };
        insert_unique(&mut docs, rec.docid, doc, path, line)?;
    }
    Ok(Corpus { docs })
}

pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for (id, doc) in &corpus.docs {
        let rec = CorpusRecord {
            docid: id.clone(),
            title: doc.title.clone(),
            text: doc.text.clone(),
        };
        out.push_str(&serde_json::to_string(&rec)?);
        out.push('\n');
    }
    write_text(path.as_ref(), &out)
}

/// Parses `qid<TAB>text` lines.
pub fn parse_queries(path: impl AsRef<Path>) -> Result<QuerySet> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut queries = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (qid, body) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, i + 1, "expected `qid<TAB>text`"))?;
        let qid = qid.trim();
        if qid.is_empty() {
            return Err(Error::parse(path, i + 1, "empty query id"));
        }
        insert_unique(&mut queries, qid.to_string(), body.to_string(), path, i + 1)?;
    }
    Ok(QuerySet { queries })
}

pub fn write_queries(queries: &QuerySet, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for (qid, text) in &queries.queries {
        let clean: String = text
            .chars()
            .map(|c| {
                if c == '\t' || c == '\n' || c == '\r' {
                    ' '
                } else {
                    c
                }
            })
            .collect();
        writeln!(out, "{qid}\t{clean}").expect("write to String");
    }
    write_text(path.as_ref(), &out)
}

/// Zero weights are dropped; negative or non-finite weights are errors.
pub fn parse_sparse_vectors(path: impl AsRef<Path>) -> Result<SparseVectorSet> {
    let path = path.as_ref();
    let mut vectors = BTreeMap::new();
    for (line, rec) in records::<SparseRecord>(path)? {
        let mut terms = BTreeMap::new();
        for (term, w) in rec.vector {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::parse(
                    path,
                    line,
                    format!("weight {w} for term `{term}` is not a positive finite number"),
                ));
            }
            if w > 0.0 {
                terms.insert(term, w);
            }
        }
        insert_unique(&mut vectors, rec.id, terms, path, line)?;
    }
    Ok(SparseVectorSet { vectors })
}

pub fn write_sparse_vectors(set: &SparseVectorSet, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for (id, v) in &set.vectors {
        let rec = SparseRecord {
            id: id.clone(),
            vector: v.clone(),
        };
        out.push_str(&serde_json::to_string(&rec)?);
        out.push('\n');
    }
    write_text(path.as_ref(), &out)
}

fn check_vector(v: &[f64], dim: usize, path: &Path, line: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: v.len(),
            context: format!("{}:{line}", path.display()),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::parse(path, line, "non-finite vector component"));
    }
    Ok(())
}

/// Parses `{"id": .., "vector": [..]}` records. When `dim` is `None` it is
/// taken from the first record.
pub fn parse_dense_vectors(path: impl AsRef<Path>, dim: Option<usize>) -> Result<DenseVectorSet> {
    let path = path.as_ref();
    let mut vectors = BTreeMap::new();
    let mut dim = dim;
    for (line, rec) in records::<DenseRecord>(path)? {
        let d = *dim.get_or_insert(rec.vector.len());
        if d == 0 {
            return Err(Error::parse(path, line, "zero-length vector"));
        }
        check_vector(&rec.vector, d, path, line)?;
        insert_unique(&mut vectors, rec.id, rec.vector, path, line)?;
    }
    Ok(DenseVectorSet {
        dim: dim.unwrap_or(0),
        vectors,
    })
}

pub fn write_dense_vectors(set: &DenseVectorSet, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for (id, v) in &set.vectors {
        let rec = DenseRecord {
            id: id.clone(),
            vector: v.clone(),
        };
        out.push_str(&serde_json::to_string(&rec)?);
        out.push('\n');
    }
    write_text(path.as_ref(), &out)
}

/// Parses `{"id": .., "vectors": [[..], ..]}` records for late interaction.
/// A record may carry zero token vectors.
pub fn parse_multi_vectors(path: impl AsRef<Path>, dim: Option<usize>) -> Result<MultiVectorSet> {
    let path = path.as_ref();
    let mut vectors = BTreeMap::new();
    let mut dim = dim;
    for (line, rec) in records::<MultiRecord>(path)? {
        for tok in &rec.vectors {
            let d = *dim.get_or_insert(tok.len());
            if d == 0 {
                return Err(Error::parse(path, line, "zero-length token vector"));
            }
            check_vector(tok, d, path, line)?;
        }
        insert_unique(&mut vectors, rec.id, rec.vectors, path, line)?;
    }
    Ok(MultiVectorSet {
        dim: dim.unwrap_or(0),
        vectors,
    })
}

pub fn write_multi_vectors(set: &MultiVectorSet, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for (id, v) in &set.vectors {
        let rec = MultiRecord {
            id: id.clone(),
            vectors: v.clone(),
        };
        out.push_str(&serde_json::to_string(&rec)?);
        out.push('\n');
    }
    write_text(path.as_ref(), &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(content: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), content).unwrap();
        f
    }

    #[test]
    fn corpus_record() {
        let f = tmp("{\"docid\":\"d1\",\"title\":\"T\",\"text\":\"B\"}\n");
        let c = parse_corpus(f.path()).unwrap();
        assert_eq!(
            c.get("d1").unwrap(),
            &Document {
                title: "T".into(),
                text: "B".into()
            }
        );
    }

    #[test]
    fn corpus_requires_title_and_text() {
        let f = tmp("{\"docid\":\"d1\",\"text\":\"B\"}\n");
        assert!(matches!(
            parse_corpus(f.path()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn dense_dimension_is_checked() {
        let f = tmp("{\"id\":\"d1\",\"vector\":[1,2,3,4]}\n");
        assert!(matches!(
            parse_dense_vectors(f.path(), Some(3)),
            Err(Error::DimensionMismatch {
                expected: 3,
                found: 4,
                ..
            })
        ));
        let f = tmp("{\"id\":\"a\",\"vector\":[1,2]}\n{\"id\":\"b\",\"vector\":[1]}\n");
        assert!(parse_dense_vectors(f.path(), None).is_err());
    }

    #[test]
    fn sparse_record() {
        let f = tmp("{\"id\":\"d1\",\"vector\":{\"cat\":1.5,\"dog\":0}}\n");
        let s = parse_sparse_vectors(f.path()).unwrap();
        assert_eq!(s.vectors["d1"].len(), 1);
        assert_eq!(s.vectors["d1"]["cat"], 1.5);
        let f = tmp("{\"id\":\"d1\",\"vector\":{\"cat\":-1}}\n");
        assert!(parse_sparse_vectors(f.path()).is_err());
    }

    #[test]
    fn multi_vectors_allow_empty_docs() {
        let f = tmp("{\"id\":\"a\",\"vectors\":[[1,0],[0,1]]}\n{\"id\":\"b\",\"vectors\":[]}\n");
        let m = parse_multi_vectors(f.path(), None).unwrap();
        assert_eq!(m.dim, 2);
        assert!(m.vectors["b"].is_empty());
    }

    #[test]
    fn queries_tsv() {
        let f = tmp("q1\thello world\nq2\tsecond\n");
        let q = parse_queries(f.path()).unwrap();
        assert_eq!(q.get("q1"), Some("hello world"));
        let f = tmp("q1 no tab\n");
        assert!(parse_queries(f.path()).is_err());
    }
}
