//! Dense embedding matrices and cosine similarity.
//!
//! Values are stored as `f32`; every reduction accumulates in `f64`.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Row norm tolerance for matrices flagged as normalized.
pub const UNIT_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    data: Vec<f32>,
    dim: usize,
    normalized: bool,
    index: HashMap<String, usize>,
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

pub(crate) fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

impl EmbeddingMatrix {
    pub fn new(ids: Vec<String>, dim: usize, data: Vec<f32>, normalized: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dim must be at least 1"));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::invalid(format!(
                "{} ids with dim {dim} need {} values, got {}",
                ids.len(),
                ids.len() * dim,
                data.len()
            )));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        let m = EmbeddingMatrix {
            ids,
            data,
            dim,
            normalized,
            index,
        };
        for (i, row) in m.rows_iter().enumerate() {
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("{v} in row {:?}", m.ids[i])));
            }
            if normalized && (norm(row) - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::invalid(format!(
                    "row {:?} flagged normalized but has norm {}",
                    m.ids[i],
                    norm(row)
                )));
            }
        }
        Ok(m)
    }

    pub fn from_rows(ids: Vec<String>, rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimMismatch {
                expected: dim,
                actual: bad.len(),
            });
        }
        Self::new(ids, dim, rows.concat(), false)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.ids.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index_of(id).map(|i| self.row(i))
    }

    /// Sub-matrix with the given ids, in the given order.
    pub fn select<S: AsRef<str>>(&self, ids: &[S]) -> Result<Self> {
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        for id in ids {
            let row = self
                .get(id.as_ref())
                .ok_or_else(|| Error::MissingEmbedding(id.as_ref().to_string()))?;
            data.extend_from_slice(row);
        }
        let ids = ids.iter().map(|s| s.as_ref().to_string()).collect();
        Self::new(ids, self.dim, data, self.normalized)
    }

    pub fn l2_normalize(&self) -> Result<Self> {
        let mut data = Vec::with_capacity(self.data.len());
        for (i, row) in self.rows_iter().enumerate() {
            let n = norm(row);
            if n == 0.0 {
                return Err(Error::ZeroNorm(self.ids[i].clone()));
            }
            data.extend(row.iter().map(|&v| (v as f64 / n) as f32));
        }
        Self::new(self.ids.clone(), self.dim, data, true)
    }
}

pub fn l2_normalize(m: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    m.l2_normalize()
}

/// Dense row-major similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SimMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl SimMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        SimMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged similarity rows");
        SimMatrix::new(rows.len(), cols, rows.concat())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> SimMatrix {
        let mut data = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                data[c * self.rows + r] = self.get(r, c);
            }
        }
        SimMatrix::new(self.cols, self.rows, data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SimMatrix {
        SimMatrix::new(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }
}

/// Cosine similarities between every query row and every gallery row.
pub fn sim_matrix(queries: &EmbeddingMatrix, gallery: &EmbeddingMatrix) -> Result<SimMatrix> {
    if queries.dim() != gallery.dim() {
        return Err(Error::DimMismatch {
            expected: queries.dim(),
            actual: gallery.dim(),
        });
    }
    if !queries.is_normalized() || !gallery.is_normalized() {
        return Err(Error::invalid("sim_matrix needs normalized inputs"));
    }
    let cols = gallery.rows();
    let mut data = vec![0.0; queries.rows() * cols];
    if cols > 0 {
        data.par_chunks_mut(cols).enumerate().for_each(|(i, out)| {
            let q = queries.row(i);
            for (j, slot) in out.iter_mut().enumerate() {
                *slot = dot(q, gallery.row(j));
            }
        });
    }
    Ok(SimMatrix::new(queries.rows(), cols, data))
}
