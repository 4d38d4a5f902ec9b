//! Task-aware memory bank.
//!
//! The bank is a fixed-shape `(C+M) x L x D` tensor. Empty slots are zero
//! vectors carrying a `+inf` entropy sentinel. Zero slots only rescale the
//! aggregated proxy rows, and every proxy row is L2-normalized afterwards, so
//! the kernels below never branch on occupancy.

mod snapshot;

use serde::Serialize;

pub use snapshot::{dump_snapshot, load_snapshot, SnapshotMeta};

use crate::embeddings::{dot, normalize_in_place, ProxyMatrix, MIN_NORM};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheKind {
    CacheNegative,
    CachePositive,
    Skip,
}

impl CacheKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CacheKind::CacheNegative => "negative",
            CacheKind::CachePositive => "positive",
            CacheKind::Skip => "skip",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "negative" => Some(CacheKind::CacheNegative),
            "positive" => Some(CacheKind::CachePositive),
            "skip" => Some(CacheKind::Skip),
            _ => None,
        }
    }
}

/// A caching decision together with the class slot it targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CacheDecision {
    pub kind: CacheKind,
    pub target_class: Option<usize>,
}

impl CacheDecision {
    pub const SKIP: CacheDecision = CacheDecision {
        kind: CacheKind::Skip,
        target_class: None,
    };
}

/// Gap criterion: cache as negative iff `s_nl < gamma - g*gamma`, as positive
/// iff `s_nl >= gamma + g*(1-gamma)`, skip otherwise.
pub fn caching_decision(s_nl: f64, gamma: f64, gap: f64) -> CacheKind {
    gap_decision(s_nl, 1.0 - s_nl, gamma, gap, gap)
}

/// Gap criterion on the split posterior mass, with separate gaps for the
/// negative and positive side.
///
/// The upper bound is tested on the OOD mass (`1 - s_nl <= (1-gamma) -
/// g*(1-gamma)`), which stays strictly positive even when `s_nl` itself
/// rounds to `1.0` at low temperatures. With `g = 1` nothing is ever cached.
pub fn gap_decision(
    id_mass: f64,
    ood_mass: f64,
    gamma: f64,
    neg_gap: f64,
    pos_gap: f64,
) -> CacheKind {
    if id_mass < gamma - neg_gap * gamma {
        CacheKind::CacheNegative
    } else if ood_mass <= (1.0 - gamma) - pos_gap * (1.0 - gamma) {
        CacheKind::CachePositive
    } else {
        CacheKind::Skip
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    /// Stored in a previously empty slot.
    Filled { slot: usize },
    /// Replaced the highest-entropy entry of a full class.
    Replaced { slot: usize },
    /// Class full and the candidate was not strictly more confident.
    Rejected,
}

impl InsertOutcome {
    pub fn changed(self) -> bool {
        !matches!(self, InsertOutcome::Rejected)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskAwareMemory {
    id_count: usize,
    neg_count: usize,
    len: usize,
    dim: usize,
    slots: Vec<f64>,
    entropies: Vec<f64>,
    // insertion sequence numbers; among equal entropies the newest is evicted first
    stamps: Vec<u64>,
    occupancy: Vec<usize>,
    next_stamp: u64,
}

/// Bytes needed for the slot tensor at `bytes_per_value` bytes per element.
pub fn footprint_bytes(classes: usize, len: usize, dim: usize, bytes_per_value: usize) -> usize {
    classes * len * dim * bytes_per_value
}

impl TaskAwareMemory {
    pub fn new(id_count: usize, neg_count: usize, len: usize, dim: usize) -> Result<Self> {
        if id_count == 0 || neg_count == 0 || len == 0 || dim == 0 {
            return Err(Error::ConfigInvalid(format!(
                "memory dimensions must be >= 1 (C={id_count}, M={neg_count}, L={len}, D={dim})"
            )));
        }
        let classes = id_count + neg_count;
        Ok(TaskAwareMemory {
            id_count,
            neg_count,
            len,
            dim,
            slots: vec![0.0; classes * len * dim],
            entropies: vec![f64::INFINITY; classes * len],
            stamps: vec![0; classes * len],
            occupancy: vec![0; classes],
            next_stamp: 0,
        })
    }

    /// Fresh memory shaped for the given proxy matrix.
    pub fn for_proxies(proxies: &ProxyMatrix, len: usize) -> Result<Self> {
        Self::new(proxies.id_count(), proxies.neg_count(), len, proxies.dim())
    }

    pub fn id_count(&self) -> usize {
        self.id_count
    }

    pub fn neg_count(&self) -> usize {
        self.neg_count
    }

    pub fn classes(&self) -> usize {
        self.id_count + self.neg_count
    }

    /// Slots per class, `L`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.total_occupancy() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn occupancy(&self, class: usize) -> usize {
        self.occupancy[class]
    }

    pub fn total_occupancy(&self) -> usize {
        self.occupancy.iter().sum()
    }

    /// Bytes used by the slot tensor in this process (`f64` storage).
    pub fn footprint_bytes(&self) -> usize {
        footprint_bytes(self.classes(), self.len, self.dim, std::mem::size_of::<f64>())
    }

    pub fn slot(&self, class: usize, slot: usize) -> &[f64] {
        let start = (class * self.len + slot) * self.dim;
        &self.slots[start..start + self.dim]
    }

    pub fn entropy(&self, class: usize, slot: usize) -> f64 {
        self.entropies[class * self.len + slot]
    }

    /// Filled `(vector, entropy)` pairs of a class, in slot order.
    pub fn entries(&self, class: usize) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        (0..self.occupancy[class]).map(move |l| (self.slot(class, l), self.entropy(class, l)))
    }

    /// All `L` slots of a class, including empty (zero) ones.
    fn class_block(&self, class: usize) -> &[f64] {
        let start = class * self.len * self.dim;
        &self.slots[start..start + self.len * self.dim]
    }

    fn check_proxies(&self, text: &ProxyMatrix) -> Result<()> {
        if text.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: text.dim(),
            });
        }
        if text.id_count() != self.id_count || text.neg_count() != self.neg_count {
            return Err(Error::DimensionMismatch {
                expected: self.classes(),
                found: text.len(),
            });
        }
        Ok(())
    }

    /// Caches `v` under `class`. Fills the first empty slot while the class has
    /// room; once full, replaces the highest-entropy entry only if `entropy` is
    /// strictly lower.
    pub fn insert(&mut self, class: usize, v: &[f64], entropy: f64) -> Result<InsertOutcome> {
        if class >= self.classes() {
            return Err(Error::ConfigInvalid(format!(
                "class {class} out of range for {} memory classes",
                self.classes()
            )));
        }
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        let filled = self.occupancy[class];
        let outcome = if filled < self.len {
            self.occupancy[class] += 1;
            InsertOutcome::Filled { slot: filled }
        } else {
            let base = class * self.len;
            let worst = (0..self.len)
                .max_by(|&a, &b| {
                    self.entropies[base + a]
                        .total_cmp(&self.entropies[base + b])
                        .then(self.stamps[base + a].cmp(&self.stamps[base + b]))
                })
                .expect("len >= 1");
            if !(entropy < self.entropies[base + worst]) {
                return Ok(InsertOutcome::Rejected);
            }
            InsertOutcome::Replaced { slot: worst }
        };
        let (InsertOutcome::Filled { slot: l } | InsertOutcome::Replaced { slot: l }) = outcome
        else {
            unreachable!()
        };
        let idx = class * self.len + l;
        self.slots[idx * self.dim..(idx + 1) * self.dim].copy_from_slice(v);
        self.entropies[idx] = entropy;
        self.stamps[idx] = self.next_stamp;
        self.next_stamp += 1;
        Ok(outcome)
    }

    /// Task-adaptive proxies: per class, the L2-normalized mean of the `L + 1`
    /// rows of `[memory slots; text proxy]`.
    pub fn task_adaptive_proxies(&self, text: &ProxyMatrix) -> Result<ProxyMatrix> {
        self.check_proxies(text)?;
        let d = self.dim;
        let scale = 1.0 / (self.len as f64 + 1.0);
        let mut out = vec![0.0; self.classes() * d];
        for (y, row) in out.chunks_exact_mut(d).enumerate() {
            for m in self.class_block(y).chunks_exact(d).chain(std::iter::once(text.row(y))) {
                row.iter_mut().zip(m).for_each(|(r, x)| *r += x);
            }
            row.iter_mut().for_each(|r| *r *= scale);
            let n = normalize_in_place(row);
            if !(n > MIN_NORM) {
                return Err(Error::DegenerateProxy { class: y, norm: n });
            }
        }
        Ok(ProxyMatrix::from_flat_unchecked(
            out,
            d,
            self.id_count,
            self.neg_count,
        ))
    }

    /// Sample-adaptive proxies: per class, the L2-normalized sum of the
    /// `L + 1` extended rows weighted by `exp(-beta * (1 - v.m))`.
    ///
    /// Fails with [`Error::DegenerateProxy`] only if the weighted rows cancel.
    pub fn sample_adaptive_proxies(
        &self,
        text: &ProxyMatrix,
        v: &[f64],
        beta: f64,
    ) -> Result<ProxyMatrix> {
        self.check_proxies(text)?;
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        if !(beta > 0.0) {
            return Err(Error::ConfigInvalid(format!("beta must be > 0, got {beta}")));
        }
        let d = self.dim;
        let mut out = vec![0.0; self.classes() * d];
        let mut sims = vec![0.0; self.len + 1];
        for (y, row) in out.chunks_exact_mut(d).enumerate() {
            let extended = || self.class_block(y).chunks_exact(d).chain(std::iter::once(text.row(y)));
            for (s, m) in sims.iter_mut().zip(extended()) {
                *s = dot(v, m);
            }
            // weights are taken relative to the largest one over non-empty rows;
            // the per-row scale cancels in the final normalization
            let filled = self.occupancy[y];
            let top = sims[..filled]
                .iter()
                .copied()
                .fold(sims[self.len], f64::max);
            for (s, m) in sims.iter().zip(extended()) {
                let w = attention_weight(*s - top + 1.0, beta);
                row.iter_mut().zip(m).for_each(|(r, x)| *r += w * x);
            }
            let n = normalize_in_place(row);
            if !(n > MIN_NORM) {
                return Err(Error::DegenerateProxy { class: y, norm: n });
            }
        }
        Ok(ProxyMatrix::from_flat_unchecked(
            out,
            d,
            self.id_count,
            self.neg_count,
        ))
    }

    pub fn occupancy_report(&self) -> OccupancyReport {
        let per_class: Vec<ClassOccupancy> = (0..self.classes())
            .map(|y| {
                let ents: Vec<f64> = self.entries(y).map(|(_, e)| e).collect();
                let count = ents.len();
                let summary = (count > 0).then(|| EntropySummary {
                    min: ents.iter().copied().fold(f64::INFINITY, f64::min),
                    max: ents.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    mean: ents.iter().sum::<f64>() / count as f64,
                });
                ClassOccupancy {
                    count,
                    entropy: summary,
                }
            })
            .collect();
        let id_total = per_class[..self.id_count].iter().map(|c| c.count).sum();
        let neg_total = per_class[self.id_count..].iter().map(|c| c.count).sum();
        OccupancyReport {
            capacity_per_class: self.len,
            id_total,
            neg_total,
            per_class,
        }
    }

    pub(crate) fn raw_parts(&self) -> (&[f64], &[f64], &[u64]) {
        (&self.slots, &self.entropies, &self.stamps)
    }

    pub(crate) fn from_raw_parts(
        id_count: usize,
        neg_count: usize,
        len: usize,
        dim: usize,
        slots: Vec<f64>,
        entropies: Vec<f64>,
        stamps: Vec<u64>,
        occupancy: Vec<usize>,
    ) -> Self {
        let next_stamp = stamps.iter().max().map_or(0, |s| s + 1);
        TaskAwareMemory {
            id_count,
            neg_count,
            len,
            dim,
            slots,
            entropies,
            stamps,
            occupancy,
            next_stamp,
        }
    }
}

/// `exp(-beta * (1 - x))`: 1 at `x = 1`, sharper falloff for larger `beta`.
#[inline]
pub fn attention_weight(x: f64, beta: f64) -> f64 {
    (-beta * (1.0 - x)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropySummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassOccupancy {
    pub count: usize,
    pub entropy: Option<EntropySummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupancyReport {
    pub capacity_per_class: usize,
    pub id_total: usize,
    pub neg_total: usize,
    pub per_class: Vec<ClassOccupancy>,
}

impl OccupancyReport {
    pub fn total(&self) -> usize {
        self.id_total + self.neg_total
    }
}

#[cfg(test)]
mod tests;
