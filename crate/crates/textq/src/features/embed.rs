//! Dense document features: averaged pretrained word vectors and
//! ingestion of precomputed per-instance vectors.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::tokenize::feature_tokens;

use super::matrix::{DenseMatrix, FeatureMatrix, Features};

/// Pretrained word vectors keyed by token.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    /// Tokens that appeared more than once in the file; first occurrence won.
    pub duplicates: usize,
}

impl EmbeddingTable {
    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    #[cfg(test)]
    pub(crate) fn from_pairs(dim: usize, pairs: &[(&str, Vec<f64>)]) -> Self {
        EmbeddingTable {
            dim,
            vectors: pairs.iter().map(|(t, v)| (t.to_string(), v.clone())).collect(),
            duplicates: 0,
        }
    }
}

/// Loads a text word-vector file: an optional `count dim` header line,
/// then one `token v1 .. vdim` line per vector.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dim: Option<usize> = None;
    let mut vectors: HashMap<String, Vec<f64>> = HashMap::new();
    let mut duplicates = 0usize;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if lineno == 1 && fields.len() == 2 {
            // "count dim" header
            if let (Ok(_count), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                dim = Some(d);
                continue;
            }
        }
        if fields.len() < 2 {
            return Err(Error::line(path, lineno, "expected a token and floats"));
        }
        let token = fields[0].to_string();
        let mut vector = Vec::with_capacity(fields.len() - 1);
        for f in &fields[1..] {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::line(path, lineno, format!("bad float {f:?}")))?;
            vector.push(v);
        }
        match dim {
            None => dim = Some(vector.len()),
            Some(d) if d != vector.len() => {
                return Err(Error::line(
                    path,
                    lineno,
                    format!("dimension {} does not match declared {d}", vector.len()),
                ));
            }
            _ => {}
        }
        if vectors.contains_key(&token) {
            duplicates += 1;
        } else {
            vectors.insert(token, vector);
        }
    }
    let dim = dim.ok_or_else(|| Error::Invalid(format!("{}: no vectors", path.display())))?;
    Ok(EmbeddingTable {
        dim,
        vectors,
        duplicates,
    })
}

/// Mean vector of the in-vocabulary feature tokens of one document, plus
/// the fraction of tokens that were found. Out-of-vocabulary tokens are
/// skipped; an all-OOV document yields the zero vector with coverage 0.
pub fn embed_instance(table: &EmbeddingTable, text: &str) -> (Vec<f64>, f64) {
    let tokens = feature_tokens(text);
    let mut sum = vec![0.0; table.dim];
    let mut matched = 0usize;
    for t in &tokens {
        if let Some(v) = table.get(t) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            matched += 1;
        }
    }
    if matched > 0 {
        for s in &mut sum {
            *s /= matched as f64;
        }
    }
    let coverage = if tokens.is_empty() {
        0.0
    } else {
        matched as f64 / tokens.len() as f64
    };
    (sum, coverage)
}

/// Averaged-embedding matrix over a corpus; returns per-instance token
/// coverage alongside.
pub fn embedding_matrix(corpus: &Corpus, table: &EmbeddingTable) -> Result<(FeatureMatrix, Vec<f64>)> {
    let mut dense = DenseMatrix::new(table.dim);
    let mut coverages = Vec::with_capacity(corpus.len());
    for inst in &corpus.instances {
        let (row, coverage) = embed_instance(table, &inst.text);
        dense.push_row(&row);
        coverages.push(coverage);
    }
    let matrix = FeatureMatrix {
        features: Features::Dense(dense),
        labels: corpus.instances.iter().map(|i| i.label).collect(),
        groups: corpus.instances.iter().map(|i| i.subject_id.clone()).collect(),
        instance_ids: corpus.instances.iter().map(|i| i.instance_id.clone()).collect(),
        feature_id: "embed-avg".into(),
        vocab: None,
    };
    matrix.validate()?;
    Ok((matrix, coverages))
}

#[derive(Debug, Deserialize)]
struct VectorLine {
    instance_id: String,
    vector: Vec<f64>,
}

/// Loads precomputed per-instance vectors (JSONL `{instance_id, vector}`)
/// aligned to corpus order. Every corpus instance must be present and all
/// vectors must share one dimension.
pub fn load_precomputed_vectors(path: &Path, corpus: &Corpus) -> Result<FeatureMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut by_id: HashMap<String, Vec<f64>> = HashMap::new();
    let mut dim: Option<usize> = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: VectorLine =
            serde_json::from_str(&line).map_err(|e| Error::line(path, i + 1, e.to_string()))?;
        match dim {
            None => dim = Some(parsed.vector.len()),
            Some(d) if d != parsed.vector.len() => {
                return Err(Error::line(
                    path,
                    i + 1,
                    format!("vector dimension {} does not match {d}", parsed.vector.len()),
                ));
            }
            _ => {}
        }
        by_id.insert(parsed.instance_id, parsed.vector);
    }
    let dim = dim.ok_or_else(|| Error::Invalid(format!("{}: no vectors", path.display())))?;
    let mut dense = DenseMatrix::new(dim);
    for inst in &corpus.instances {
        let vector = by_id
            .get(&inst.instance_id)
            .ok_or_else(|| Error::MissingInstance(inst.instance_id.clone()))?;
        dense.push_row(vector);
    }
    let matrix = FeatureMatrix {
        features: Features::Dense(dense),
        labels: corpus.instances.iter().map(|i| i.label).collect(),
        groups: corpus.instances.iter().map(|i| i.subject_id.clone()).collect(),
        instance_ids: corpus.instances.iter().map(|i| i.instance_id.clone()).collect(),
        feature_id: format!("precomputed-{dim}d"),
        vocab: None,
    };
    matrix.validate()?;
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CorpusMetadata, Instance};
    use std::io::Write as _;

    fn write_file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "{contents}").unwrap();
        f
    }

    #[test]
    fn two_line_file_without_header() {
        let f = write_file("alpha 1.0 0.0 0.5\nbeta 0.0 2.0 -1.0\n");
        let table = load_embeddings(f.path()).unwrap();
        assert_eq!(table.dim, 3);
        assert_eq!(table.len(), 2);
        assert_eq!(table.get("alpha").unwrap(), &[1.0, 0.0, 0.5]);
    }

    #[test]
    fn header_declares_dimension() {
        let mut body = String::from("2 300\n");
        let zeros = vec!["0.0"; 300].join(" ");
        body.push_str(&format!("alpha {zeros}\n"));
        body.push_str(&format!("beta {zeros}\n"));
        let f = write_file(&body);
        let table = load_embeddings(f.path()).unwrap();
        assert_eq!(table.dim, 300);
        assert_eq!(table.len(), 2);
    }

    #[test]
    fn dimension_mismatch_names_line() {
        let f = write_file("alpha 1.0 2.0\nbeta 1.0 2.0 3.0\n");
        match load_embeddings(f.path()).unwrap_err() {
            Error::MalformedLine { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_float_names_line() {
        let f = write_file("alpha 1.0 oops\n");
        match load_embeddings(f.path()).unwrap_err() {
            Error::MalformedLine { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_tokens_first_wins() {
        let f = write_file("tok 1.0\ntok 2.0\n");
        let table = load_embeddings(f.path()).unwrap();
        assert_eq!(table.duplicates, 1);
        assert_eq!(table.get("tok").unwrap(), &[1.0]);
    }

    #[test]
    fn singleton_mean_is_the_vector() {
        let table = EmbeddingTable::from_pairs(2, &[("wound", vec![0.25, -1.5])]);
        let (v, coverage) = embed_instance(&table, "wound");
        assert_eq!(v, vec![0.25, -1.5]);
        assert_eq!(coverage, 1.0);
    }

    #[test]
    fn two_point_mean() {
        let table = EmbeddingTable::from_pairs(2, &[("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0])]);
        let (v, coverage) = embed_instance(&table, "a b");
        assert_eq!(v, vec![0.5, 0.5]);
        assert_eq!(coverage, 1.0);
    }

    #[test]
    fn oov_tokens_skipped_with_coverage() {
        let table = EmbeddingTable::from_pairs(1, &[("known", vec![4.0])]);
        let (v, coverage) = embed_instance(&table, "known unknown alsounknown gone");
        assert_eq!(v, vec![4.0]);
        assert_eq!(coverage, 0.25);
        let (zero, c0) = embed_instance(&table, "nothing matches");
        assert_eq!(zero, vec![0.0]);
        assert_eq!(c0, 0.0);
    }

    // Direct sum/count oracle on random documents.
    #[test]
    fn mean_matches_brute_force() {
        use rand::Rng;
        let mut rng = crate::rng::stream(8, "embed-oracle");
        let vocab: Vec<(String, Vec<f64>)> = (0..30)
            .map(|i| {
                (
                    format!("w{i}"),
                    (0..4).map(|_| rng.random_range(-2.0..2.0)).collect(),
                )
            })
            .collect();
        let pairs: Vec<(&str, Vec<f64>)> =
            vocab.iter().map(|(t, v)| (t.as_str(), v.clone())).collect();
        let table = EmbeddingTable::from_pairs(4, &pairs);
        for _ in 0..50 {
            let k = rng.random_range(1..20);
            let words: Vec<&str> = (0..k)
                .map(|_| {
                    if rng.random::<f64>() < 0.2 {
                        "oovtoken"
                    } else {
                        vocab[rng.random_range(0..vocab.len())].0.as_str()
                    }
                })
                .collect();
            let text = words.join(" ");
            let (got, _) = embed_instance(&table, &text);
            let mut sum = vec![0.0; 4];
            let mut n = 0;
            for w in &words {
                if let Some(v) = table.get(w) {
                    for (s, x) in sum.iter_mut().zip(v) {
                        *s += x;
                    }
                    n += 1;
                }
            }
            if n > 0 {
                for s in &mut sum {
                    *s /= n as f64;
                }
            }
            for (a, b) in got.iter().zip(&sum) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn embedding_is_order_invariant() {
        let table = EmbeddingTable::from_pairs(
            2,
            &[("a", vec![1.0, 2.0]), ("b", vec![3.0, -1.0]), ("c", vec![0.0, 0.5])],
        );
        let (x, _) = embed_instance(&table, "a b c c");
        let (y, _) = embed_instance(&table, "c a c b");
        assert_eq!(x, y);
    }

    fn tiny_corpus() -> Corpus {
        Corpus::new(
            vec![
                Instance {
                    instance_id: "a".into(),
                    subject_id: "s1".into(),
                    text: "x".into(),
                    label: 0,
                    window_days: None,
                },
                Instance {
                    instance_id: "b".into(),
                    subject_id: "s2".into(),
                    text: "y".into(),
                    label: 1,
                    window_days: None,
                },
            ],
            CorpusMetadata::default(),
        )
        .unwrap()
    }

    #[test]
    fn precomputed_vectors_align_to_corpus_order() {
        let corpus = tiny_corpus();
        // file shuffled relative to the corpus
        let f = write_file(
            "{\"instance_id\": \"b\", \"vector\": [2.0, 0.0]}\n\
             {\"instance_id\": \"a\", \"vector\": [1.0, 1.0]}\n",
        );
        let m = load_precomputed_vectors(f.path(), &corpus).unwrap();
        assert_eq!(m.n_rows(), 2);
        assert_eq!(m.features.get(0, 0), 1.0);
        assert_eq!(m.features.get(1, 0), 2.0);
    }

    #[test]
    fn missing_instance_named_in_error() {
        let corpus = tiny_corpus();
        let f = write_file("{\"instance_id\": \"a\", \"vector\": [1.0]}\n");
        match load_precomputed_vectors(f.path(), &corpus).unwrap_err() {
            Error::MissingInstance(id) => assert_eq!(id, "b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wide_vectors_accepted() {
        let corpus = tiny_corpus();
        let vec768: Vec<String> = (0..768).map(|i| format!("{}", i as f64 * 0.001)).collect();
        let body = format!(
            "{{\"instance_id\": \"a\", \"vector\": [{v}]}}\n{{\"instance_id\": \"b\", \"vector\": [{v}]}}\n",
            v = vec768.join(",")
        );
        let f = write_file(&body);
        let m = load_precomputed_vectors(f.path(), &corpus).unwrap();
        assert_eq!(m.features.n_cols(), 768);
        assert_eq!(m.feature_id, "precomputed-768d");
    }
}
