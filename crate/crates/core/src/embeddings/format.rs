//! EMB1: little-endian float32 embedding container.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "EMB1"
//! 4       4     version (u32) = 1
//! 8       4     count N (u32)
//! 12      4     dim D (u32)
//! 16      1     flags (u8), bit 0: producer claims rows are unit-norm
//! 17      4*N*D row-major float32 values
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"EMB1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 17;
pub const FLAG_UNIT_NORM: u8 = 0b0000_0001;

/// Raw contents of an EMB1 file. Rows are kept exactly as stored.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    count: usize,
    dim: usize,
    pub flags: u8,
    values: Vec<f32>,
}

impl EmbeddingFile {
    /// Builds a file from row-major values. `values.len()` must equal `count * dim`.
    pub fn new(count: usize, dim: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != count * dim {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: count * dim,
            });
        }
        if count > 0 && dim == 0 {
            return Err(Error::EmptyInput("embedding rows have dimension 0"));
        }
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteValue {
                row: i / dim,
                col: i % dim,
            });
        }
        Ok(EmbeddingFile {
            count,
            dim,
            flags: 0,
            values,
        })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Self::new(0, 0, Vec::new());
        };
        let dim = first.as_ref().len();
        let mut values = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), dim, values)
    }

    /// Narrows `f64` rows to float32 for storage.
    pub fn from_f64_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let narrowed: Vec<Vec<f32>> = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&x| x as f32).collect())
            .collect();
        Self::from_rows(&narrowed)
    }

    pub fn with_flags(mut self, flags: u8) -> Self {
        self.flags = flags;
        self
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn claims_unit_norm(&self) -> bool {
        self.flags & FLAG_UNIT_NORM != 0
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        // chunks_exact panics on a zero chunk size; an empty file has no rows anyway
        self.values.chunks_exact(self.dim.max(1))
    }
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

/// Parses an EMB1 byte buffer.
pub fn decode(bytes: &[u8]) -> Result<EmbeddingFile> {
    if bytes.len() < 4 {
        return Err(Error::TruncatedFile {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic { found: magic });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedFile {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let version = read_u32(bytes, 4);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let count = read_u32(bytes, 8) as usize;
    let dim = read_u32(bytes, 12) as usize;
    let flags = bytes[16];
    if count > 0 && dim == 0 {
        return Err(Error::EmptyInput("embedding rows have dimension 0"));
    }

    let expected = count
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::TruncatedFile {
            expected: usize::MAX,
            found: bytes.len(),
        })?;
    if bytes.len() < expected {
        return Err(Error::TruncatedFile {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::TrailingData {
            extra: bytes.len() - expected,
        });
    }

    let mut values = Vec::with_capacity(count * dim);
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
        let x = f32::from_le_bytes(chunk.try_into().unwrap());
        if !x.is_finite() {
            return Err(Error::NonFiniteValue {
                row: i / dim,
                col: i % dim,
            });
        }
        values.push(x);
    }
    Ok(EmbeddingFile {
        count,
        dim,
        flags,
        values,
    })
}

/// Serializes to EMB1 bytes.
pub fn encode(file: &EmbeddingFile) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + file.values.len() * 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(file.count as u32).to_le_bytes());
    out.extend_from_slice(&(file.dim as u32).to_le_bytes());
    out.push(file.flags);
    for x in &file.values {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn load_embedding_file(path: impl AsRef<Path>) -> Result<EmbeddingFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Writes to a temporary sibling and renames it into place.
pub fn save_embedding_file(path: impl AsRef<Path>, file: &EmbeddingFile) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("emb1.tmp");
    fs::write(&tmp, encode(file)).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
