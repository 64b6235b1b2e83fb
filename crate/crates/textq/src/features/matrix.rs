//! Design matrices: CSR sparse rows for TF-IDF, dense rows for
//! embeddings, both aligned with labels and subject ids.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Compressed sparse rows; values within a row are ordered by column.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseMatrix {
    pub n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(n_cols: usize) -> Self {
        SparseMatrix {
            n_cols,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Appends one row of (column, value) pairs sorted by column.
    pub fn push_row(&mut self, row: &[(u32, f64)]) {
        debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0));
        for &(c, v) in row {
            self.indices.push(c);
            self.values.push(v);
        }
        self.indptr.push(self.indices.len());
    }

    pub fn n_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseMatrix {
    pub n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(n_cols: usize) -> Self {
        DenseMatrix { n_cols, data: Vec::new() }
    }

    pub fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.n_cols);
        self.data.extend_from_slice(row);
    }

    pub fn n_rows(&self) -> usize {
        if self.n_cols == 0 {
            0
        } else {
            self.data.len() / self.n_cols
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Sparse(SparseMatrix),
    Dense(DenseMatrix),
}

impl Features {
    pub fn n_rows(&self) -> usize {
        match self {
            Features::Sparse(m) => m.n_rows(),
            Features::Dense(m) => m.n_rows(),
        }
    }

    pub fn n_cols(&self) -> usize {
        match self {
            Features::Sparse(m) => m.n_cols,
            Features::Dense(m) => m.n_cols,
        }
    }

    /// Nonzero (column, value) pairs of one row.
    pub fn row_nonzeros(&self, i: usize) -> Vec<(u32, f64)> {
        match self {
            Features::Sparse(m) => {
                let (cols, vals) = m.row(i);
                cols.iter().copied().zip(vals.iter().copied()).collect()
            }
            Features::Dense(m) => m
                .row(i)
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(c, &v)| (c as u32, v))
                .collect(),
        }
    }

    /// Dot product of row `i` with a dense weight vector.
    pub fn row_dot(&self, i: usize, weights: &[f64]) -> f64 {
        match self {
            Features::Sparse(m) => {
                let (cols, vals) = m.row(i);
                cols.iter()
                    .zip(vals)
                    .map(|(&c, &v)| v * weights[c as usize])
                    .sum()
            }
            Features::Dense(m) => m.row(i).iter().zip(weights).map(|(a, b)| a * b).sum(),
        }
    }

    /// Value of one cell; sparse lookups binary-search the row.
    pub fn get(&self, i: usize, col: u32) -> f64 {
        match self {
            Features::Sparse(m) => {
                let (cols, vals) = m.row(i);
                match cols.binary_search(&col) {
                    Ok(k) => vals[k],
                    Err(_) => 0.0,
                }
            }
            Features::Dense(m) => m.row(i)[col as usize],
        }
    }
}

/// Features aligned with labels and group (subject) ids.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub features: Features,
    pub labels: Vec<u8>,
    pub groups: Vec<String>,
    pub instance_ids: Vec<String>,
    /// Short description of how the features were produced.
    pub feature_id: String,
    pub vocab: Option<Vec<String>>,
}

impl FeatureMatrix {
    pub fn validate(&self) -> Result<()> {
        let n = self.features.n_rows();
        if self.labels.len() != n || self.groups.len() != n || self.instance_ids.len() != n {
            return Err(Error::Invalid(format!(
                "matrix rows {n} misaligned with labels {} / groups {} / ids {}",
                self.labels.len(),
                self.groups.len(),
                self.instance_ids.len()
            )));
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.features.n_rows()
    }

    /// New matrix restricted to the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> FeatureMatrix {
        let features = match &self.features {
            Features::Sparse(m) => {
                let mut out = SparseMatrix::new(m.n_cols);
                for &r in rows {
                    let (cols, vals) = m.row(r);
                    let row: Vec<(u32, f64)> =
                        cols.iter().copied().zip(vals.iter().copied()).collect();
                    out.push_row(&row);
                }
                Features::Sparse(out)
            }
            Features::Dense(m) => {
                let mut out = DenseMatrix::new(m.n_cols);
                for &r in rows {
                    out.push_row(m.row(r));
                }
                Features::Dense(out)
            }
        };
        FeatureMatrix {
            features,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            groups: rows.iter().map(|&r| self.groups[r].clone()).collect(),
            instance_ids: rows.iter().map(|&r| self.instance_ids[r].clone()).collect(),
            feature_id: self.feature_id.clone(),
            vocab: self.vocab.clone(),
        }
    }
}

/// Sidecar written next to the triplet file.
#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    kind: String,
    n_rows: usize,
    n_cols: usize,
    labels: Vec<u8>,
    groups: Vec<String>,
    instance_ids: Vec<String>,
    feature_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vocab: Option<Vec<String>>,
}

fn triplet_path(base: &Path) -> PathBuf {
    base.with_extension("triplets")
}

fn sidecar_path(base: &Path) -> PathBuf {
    base.with_extension("json")
}

/// Persists the matrix as `<base>.triplets` (`row col value` lines for
/// every stored nonzero) plus a `<base>.json` sidecar with labels,
/// groups, ids and vocabulary.
pub fn save_matrix(matrix: &FeatureMatrix, base: &Path) -> Result<()> {
    matrix.validate()?;
    let tpath = triplet_path(base);
    let file = File::create(&tpath).map_err(|e| Error::io(&tpath, e))?;
    let mut w = BufWriter::new(file);
    for i in 0..matrix.n_rows() {
        for (c, v) in matrix.features.row_nonzeros(i) {
            writeln!(w, "{i} {c} {v}").map_err(|e| Error::io(&tpath, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&tpath, e))?;

    let sidecar = Sidecar {
        kind: match matrix.features {
            Features::Sparse(_) => "sparse".into(),
            Features::Dense(_) => "dense".into(),
        },
        n_rows: matrix.n_rows(),
        n_cols: matrix.features.n_cols(),
        labels: matrix.labels.clone(),
        groups: matrix.groups.clone(),
        instance_ids: matrix.instance_ids.clone(),
        feature_id: matrix.feature_id.clone(),
        vocab: matrix.vocab.clone(),
    };
    let spath = sidecar_path(base);
    let json = serde_json::to_string(&sidecar)
        .map_err(|e| Error::Invalid(format!("serialize sidecar: {e}")))?;
    std::fs::write(&spath, json).map_err(|e| Error::io(&spath, e))
}

pub fn load_matrix(base: &Path) -> Result<FeatureMatrix> {
    let spath = sidecar_path(base);
    let sidecar: Sidecar = serde_json::from_str(
        &std::fs::read_to_string(&spath).map_err(|e| Error::io(&spath, e))?,
    )
    .map_err(|e| Error::Invalid(format!("{}: {e}", spath.display())))?;

    let tpath = triplet_path(base);
    let file = File::open(&tpath).map_err(|e| Error::io(&tpath, e))?;
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); sidecar.n_rows];
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&tpath, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let parse_err = || Error::line(&tpath, lineno + 1, "expected \"row col value\"");
        let r: usize = parts.next().ok_or_else(parse_err)?.parse().map_err(|_| parse_err())?;
        let c: u32 = parts.next().ok_or_else(parse_err)?.parse().map_err(|_| parse_err())?;
        let v: f64 = parts.next().ok_or_else(parse_err)?.parse().map_err(|_| parse_err())?;
        if r >= sidecar.n_rows || c as usize >= sidecar.n_cols {
            return Err(Error::line(&tpath, lineno + 1, "index out of bounds"));
        }
        rows[r].push((c, v));
    }
    let features = match sidecar.kind.as_str() {
        "sparse" => {
            let mut m = SparseMatrix::new(sidecar.n_cols);
            for row in &mut rows {
                row.sort_by_key(|(c, _)| *c);
                m.push_row(row);
            }
            Features::Sparse(m)
        }
        "dense" => {
            let mut m = DenseMatrix::new(sidecar.n_cols);
            for row in &rows {
                let mut dense = vec![0.0; sidecar.n_cols];
                for &(c, v) in row {
                    dense[c as usize] = v;
                }
                m.push_row(&dense);
            }
            Features::Dense(m)
        }
        other => {
            return Err(Error::Invalid(format!("unknown matrix kind {other:?}")));
        }
    };
    let matrix = FeatureMatrix {
        features,
        labels: sidecar.labels,
        groups: sidecar.groups,
        instance_ids: sidecar.instance_ids,
        feature_id: sidecar.feature_id,
        vocab: sidecar.vocab,
    };
    matrix.validate()?;
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_sparse() -> FeatureMatrix {
        let mut m = SparseMatrix::new(4);
        m.push_row(&[(0, 1.0), (2, 0.5)]);
        m.push_row(&[]);
        m.push_row(&[(3, -2.0)]);
        FeatureMatrix {
            features: Features::Sparse(m),
            labels: vec![1, 0, 1],
            groups: vec!["s1".into(), "s1".into(), "s2".into()],
            instance_ids: vec!["a".into(), "b".into(), "c".into()],
            feature_id: "test".into(),
            vocab: Some(vec!["w0".into(), "w1".into(), "w2".into(), "w3".into()]),
        }
    }

    #[test]
    fn sparse_row_access() {
        let m = sample_sparse();
        assert_eq!(m.features.get(0, 2), 0.5);
        assert_eq!(m.features.get(0, 1), 0.0);
        assert_eq!(m.features.row_nonzeros(1), vec![]);
        assert_eq!(m.features.row_dot(2, &[1.0, 1.0, 1.0, 2.0]), -4.0);
    }

    #[test]
    fn subset_keeps_alignment() {
        let m = sample_sparse();
        let s = m.subset(&[2, 0]);
        assert_eq!(s.labels, vec![1, 1]);
        assert_eq!(s.instance_ids, vec!["c".to_string(), "a".to_string()]);
        assert_eq!(s.features.get(0, 3), -2.0);
        assert_eq!(s.features.get(1, 0), 1.0);
    }

    #[test]
    fn misaligned_labels_rejected() {
        let mut m = sample_sparse();
        m.labels.pop();
        assert!(m.validate().is_err());
    }

    #[test]
    fn save_load_round_trip_sparse() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("feat");
        let m = sample_sparse();
        save_matrix(&m, &base).unwrap();
        let loaded = load_matrix(&base).unwrap();
        assert_eq!(m, loaded);
    }

    #[test]
    fn save_load_round_trip_dense() {
        let mut d = DenseMatrix::new(2);
        d.push_row(&[0.25, 0.0]);
        d.push_row(&[1.5, -3.0]);
        let m = FeatureMatrix {
            features: Features::Dense(d),
            labels: vec![0, 1],
            groups: vec!["a".into(), "b".into()],
            instance_ids: vec!["x".into(), "y".into()],
            feature_id: "dense-test".into(),
            vocab: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("feat");
        save_matrix(&m, &base).unwrap();
        assert_eq!(load_matrix(&base).unwrap(), m);
    }
}
