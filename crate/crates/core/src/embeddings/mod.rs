//! Embedding ingestion: the EMB1 file format, unit normalization, proxy
//! matrices and dataset manifests.
//!
//! Vectors are stored raw (float32) on disk and normalized exactly once on the
//! way in. Everything downstream of this module works in `f64` on unit-norm
//! vectors.

mod format;
mod manifest;

use std::ops::Deref;

pub use format::{
    decode, encode, load_embedding_file, save_embedding_file, EmbeddingFile, FLAG_UNIT_NORM,
    HEADER_LEN, MAGIC, VERSION,
};
pub use manifest::{Dataset, DatasetManifest, FileRole, GroundTruth};

use crate::error::{Error, Result};

/// Norms at or below this are treated as zero vectors.
pub const MIN_NORM: f64 = 1e-12;

/// Tolerance used when checking that an ingested vector is unit-norm.
pub const UNIT_NORM_TOL: f64 = 1e-5;

/// A unit-norm feature vector in cosine space.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Wraps values that the caller has already normalized.
    pub(crate) fn from_unit_unchecked(values: Vec<f64>) -> Self {
        EmbeddingVector(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl Deref for EmbeddingVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for EmbeddingVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Scales `v` to unit L2 norm.
///
/// Rejects non-finite entries and vectors with norm at or below [`MIN_NORM`].
pub fn normalize(v: &[f64]) -> Result<EmbeddingVector> {
    if let Some(col) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteValue { row: 0, col });
    }
    let n = norm(v);
    if !(n > MIN_NORM) {
        return Err(Error::ZeroVector { norm: n });
    }
    Ok(EmbeddingVector(v.iter().map(|x| x / n).collect()))
}

/// [`normalize`] for raw float32 rows as read from an EMB1 file.
pub fn normalize_f32(v: &[f32]) -> Result<EmbeddingVector> {
    let wide: Vec<f64> = v.iter().map(|&x| f64::from(x)).collect();
    normalize(&wide)
}

/// In-place L2 normalization used for aggregated proxy rows. Returns the norm
/// before scaling; the row is left untouched if that norm is at or below
/// [`MIN_NORM`].
pub(crate) fn normalize_in_place(v: &mut [f64]) -> f64 {
    let n = norm(v);
    if n > MIN_NORM {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// `(C+M) x D` matrix of unit-norm proxies. Rows `0..C` are ID proxies, rows
/// `C..C+M` are negative proxies.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyMatrix {
    data: Vec<f64>,
    dim: usize,
    id_count: usize,
    neg_count: usize,
}

impl ProxyMatrix {
    /// Builds the proxy matrix from raw ID and negative rows, normalizing every row.
    pub fn from_raw<R: AsRef<[f64]>>(id_rows: &[R], neg_rows: &[R]) -> Result<Self> {
        if id_rows.is_empty() {
            return Err(Error::EmptyInput("no ID proxy rows"));
        }
        if neg_rows.is_empty() {
            return Err(Error::EmptyInput("no negative proxy rows"));
        }
        let dim = id_rows[0].as_ref().len();
        if dim == 0 {
            return Err(Error::EmptyInput("proxy rows have dimension 0"));
        }
        let mut data = Vec::with_capacity((id_rows.len() + neg_rows.len()) * dim);
        for row in id_rows.iter().chain(neg_rows) {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(&normalize(row)?);
        }
        Ok(ProxyMatrix {
            data,
            dim,
            id_count: id_rows.len(),
            neg_count: neg_rows.len(),
        })
    }

    /// Builds the matrix from vectors that are already unit-norm.
    pub fn from_vectors(id: &[EmbeddingVector], neg: &[EmbeddingVector]) -> Result<Self> {
        Self::from_raw(id, neg)
    }

    /// Wraps a flat row-major buffer whose rows the caller guarantees are unit-norm.
    pub(crate) fn from_flat_unchecked(
        data: Vec<f64>,
        dim: usize,
        id_count: usize,
        neg_count: usize,
    ) -> Self {
        debug_assert_eq!(data.len(), (id_count + neg_count) * dim);
        ProxyMatrix {
            data,
            dim,
            id_count,
            neg_count,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn id_count(&self) -> usize {
        self.id_count
    }

    pub fn neg_count(&self) -> usize {
        self.neg_count
    }

    /// Total number of rows, `C + M`.
    pub fn len(&self) -> usize {
        self.id_count + self.neg_count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Cosine similarity of `v` to every row. `v` must be unit-norm.
    pub fn cosines(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        Ok(self.rows().map(|row| dot(row, v)).collect())
    }
}
