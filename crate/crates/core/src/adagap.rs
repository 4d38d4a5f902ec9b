//! Online ID:OOD mix-ratio estimation and the adaptive caching gap.
//!
//! A bounded FIFO keeps the ID/OOD estimate of the most recent `capacity`
//! samples. When the stream is dominated by ID samples (`MR > 0.5`) the
//! negative caching bound tightens; when OOD dominates the positive bound
//! tightens. At `MR = 0.5` with the default `g = 0.5` the criterion is the
//! plain gap rule.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::memory::{gap_decision, CacheKind};

pub const DEFAULT_QUEUE_LEN: usize = 10_000;

/// Mix ratio reported before anything has been recorded.
pub const WARMUP_MIX_RATIO: f64 = 0.5;

/// Which ID/OOD estimate is pushed into the queue for each sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateRule {
    /// `s_nl >= gamma` counts as ID.
    #[default]
    Threshold,
    /// Only samples outside the gap count; `s_nl` inside the gap is not recorded.
    Gapped,
}

#[derive(Debug, Clone)]
pub struct MixRatioEstimator {
    capacity: usize,
    fifo: VecDeque<bool>,
    id_count: usize,
}

impl Default for MixRatioEstimator {
    fn default() -> Self {
        Self::new(DEFAULT_QUEUE_LEN)
    }
}

impl MixRatioEstimator {
    /// `capacity` is clamped to at least 1.
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        MixRatioEstimator {
            capacity,
            fifo: VecDeque::with_capacity(capacity),
            id_count: 0,
        }
    }

    pub fn record(&mut self, is_id: bool) {
        if self.fifo.len() == self.capacity {
            if let Some(true) = self.fifo.pop_front() {
                self.id_count -= 1;
            }
        }
        self.fifo.push_back(is_id);
        if is_id {
            self.id_count += 1;
        }
    }

    /// Records the estimate for `s_nl` under `rule`.
    pub fn record_score(&mut self, s_nl: f64, gamma: f64, gap: f64, rule: EstimateRule) {
        match rule {
            EstimateRule::Threshold => self.record(s_nl >= gamma),
            EstimateRule::Gapped => match gap_decision(s_nl, 1.0 - s_nl, gamma, gap, gap) {
                CacheKind::CachePositive => self.record(true),
                CacheKind::CacheNegative => self.record(false),
                CacheKind::Skip => {}
            },
        }
    }

    pub fn mix_ratio(&self) -> f64 {
        if self.fifo.is_empty() {
            WARMUP_MIX_RATIO
        } else {
            self.id_count as f64 / self.fifo.len() as f64
        }
    }

    pub fn len(&self) -> usize {
        self.fifo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fifo.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn id_count(&self) -> usize {
        self.id_count
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.fifo.iter().copied()
    }
}

/// Gap rule with widened bounds: negative iff `s_nl < gamma - max(g, MR)*gamma`,
/// positive iff `s_nl >= gamma + max(g, 1-MR)*(1-gamma)`.
pub fn adaptive_decision(s_nl: f64, gamma: f64, gap: f64, mix_ratio: f64) -> CacheKind {
    let (neg_gap, pos_gap) = adaptive_gaps(gap, mix_ratio);
    gap_decision(s_nl, 1.0 - s_nl, gamma, neg_gap, pos_gap)
}

/// `(max(g, MR), max(g, 1 - MR))`: the widened negative and positive gaps.
pub fn adaptive_gaps(gap: f64, mix_ratio: f64) -> (f64, f64) {
    (gap.max(mix_ratio), gap.max(1.0 - mix_ratio))
}
