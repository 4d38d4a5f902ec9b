//! Debug / warm-start dump of a memory bank: the slot tensor as one EMB1 file
//! (`(C+M)*L` rows, class-major, empty slots as zero rows) plus a JSON sidecar.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TaskAwareMemory;
use crate::embeddings::{load_embedding_file, normalize_f32, save_embedding_file, EmbeddingFile};
use crate::error::{Error, Result};

pub const SLOTS_FILE: &str = "memory_slots.emb1";
pub const META_FILE: &str = "memory.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub id_count: usize,
    pub neg_count: usize,
    pub len: usize,
    pub dim: usize,
    pub occupancy: Vec<usize>,
    /// Per class, per slot; `null` marks an empty slot.
    pub entropies: Vec<Vec<Option<f64>>>,
    pub stamps: Vec<Vec<u64>>,
}

pub fn dump_snapshot(memory: &TaskAwareMemory, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (slots, entropies, stamps) = memory.raw_parts();
    let values: Vec<f32> = slots.iter().map(|&x| x as f32).collect();
    let file = EmbeddingFile::new(memory.classes() * memory.len(), memory.dim(), values)?;
    save_embedding_file(dir.join(SLOTS_FILE), &file)?;

    let meta = SnapshotMeta {
        id_count: memory.id_count(),
        neg_count: memory.neg_count(),
        len: memory.len(),
        dim: memory.dim(),
        occupancy: (0..memory.classes()).map(|y| memory.occupancy(y)).collect(),
        entropies: entropies
            .chunks_exact(memory.len())
            .map(|c| c.iter().map(|&e| e.is_finite().then_some(e)).collect())
            .collect(),
        stamps: stamps.chunks_exact(memory.len()).map(<[u64]>::to_vec).collect(),
    };
    let path = dir.join(META_FILE);
    fs::write(&path, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&path, e))
}

/// Restores a dumped memory bank. Filled rows are renormalized after the
/// float32 round trip.
pub fn load_snapshot(dir: impl AsRef<Path>) -> Result<TaskAwareMemory> {
    let dir = dir.as_ref();
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: SnapshotMeta = serde_json::from_str(&text)?;
    let file = load_embedding_file(dir.join(SLOTS_FILE))?;

    let classes = meta.id_count + meta.neg_count;
    // rejects zero-sized shapes
    TaskAwareMemory::new(meta.id_count, meta.neg_count, meta.len, meta.dim)?;
    if file.count() != classes * meta.len || (file.count() > 0 && file.dim() != meta.dim) {
        return Err(Error::Manifest(format!(
            "snapshot holds {} rows of dim {}, expected {} of dim {}",
            file.count(),
            file.dim(),
            classes * meta.len,
            meta.dim
        )));
    }
    if meta.occupancy.len() != classes
        || meta.entropies.len() != classes
        || meta.stamps.len() != classes
        || meta.occupancy.iter().any(|&o| o > meta.len)
    {
        return Err(Error::Manifest("inconsistent snapshot metadata".into()));
    }

    let mut slots = vec![0.0; classes * meta.len * meta.dim];
    let mut entropies = vec![f64::INFINITY; classes * meta.len];
    let mut stamps = vec![0; classes * meta.len];
    for y in 0..classes {
        if meta.entropies[y].len() != meta.len || meta.stamps[y].len() != meta.len {
            return Err(Error::Manifest(format!("class {y}: wrong slot count in metadata")));
        }
        for l in 0..meta.occupancy[y] {
            let idx = y * meta.len + l;
            let v = normalize_f32(file.row(idx))?;
            slots[idx * meta.dim..(idx + 1) * meta.dim].copy_from_slice(&v);
            entropies[idx] = meta.entropies[y][l]
                .ok_or_else(|| Error::Manifest(format!("class {y} slot {l}: missing entropy")))?;
            stamps[idx] = meta.stamps[y][l];
        }
    }
    Ok(TaskAwareMemory::from_raw_parts(
        meta.id_count,
        meta.neg_count,
        meta.len,
        meta.dim,
        slots,
        entropies,
        stamps,
        meta.occupancy,
    ))
}
