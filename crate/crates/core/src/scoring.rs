//! Stateless scoring kernels.
//!
//! All scores are softmax ratios over cosine similarities scaled by `1/tau`.
//! With `tau = 0.01` the logits span roughly `[-100, 100]`, so every softmax
//! here subtracts the maximum logit before exponentiating.

use serde::{Deserialize, Serialize};

use crate::embeddings::ProxyMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_TAU: f64 = 0.01;
pub const DEFAULT_LAMBDA: f64 = 0.1;

/// Scores are clamped to `[ENTROPY_CLAMP, 1 - ENTROPY_CLAMP]` before taking logs.
pub const ENTROPY_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    /// Softmax temperature.
    pub tau: f64,
    /// Weight of the image-proxy score in the fused score.
    pub lambda: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            tau: DEFAULT_TAU,
            lambda: DEFAULT_LAMBDA,
        }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<()> {
        check_tau(self.tau)?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::ConfigInvalid(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::ConfigInvalid(format!("tau must be > 0, got {tau}")))
    }
}

/// Softmax of `cosines / tau`, max-subtracted.
pub fn softmax_cosines(cosines: &[f64], tau: f64) -> Vec<f64> {
    let max = cosines.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = cosines.iter().map(|c| ((c - max) / tau).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    out
}

/// Posterior over all `C + M` proxies.
pub fn class_posteriors(v: &[f64], proxies: &ProxyMatrix, tau: f64) -> Result<Vec<f64>> {
    check_tau(tau)?;
    let cos = proxies.cosines(v)?;
    Ok(softmax_cosines(&cos, tau))
}

/// NegLabel score: posterior mass on the ID block.
pub fn neglabel_score(v: &[f64], proxies: &ProxyMatrix, tau: f64) -> Result<f64> {
    let p = class_posteriors(v, proxies, tau)?;
    Ok(id_mass(&p, proxies.id_count()))
}

/// Sum of the first `id_count` posterior entries.
pub fn id_mass(posteriors: &[f64], id_count: usize) -> f64 {
    posteriors[..id_count].iter().sum()
}

/// Closest label for a detected sample. Negative samples take the argmax over
/// the negative block and return its absolute index (`>= id_count`); positive
/// samples take the argmax over the ID block. Ties go to the lowest index.
pub fn pseudo_label(posteriors: &[f64], id_count: usize, is_negative: bool) -> usize {
    let range = if is_negative {
        id_count..posteriors.len()
    } else {
        0..id_count
    };
    argmax_in(posteriors, range)
}

fn argmax_in(values: &[f64], range: std::ops::Range<usize>) -> usize {
    let mut best = range.start;
    for i in range {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

/// Ratio score over an arbitrary (e.g. adaptive) proxy matrix:
/// `sum_{i<C} exp(cos_i/tau) / sum_{all} exp(cos_j/tau)`.
pub fn proxy_score(v: &[f64], proxies: &ProxyMatrix, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let cos = proxies.cosines(v)?;
    Ok(ratio_from_cosines(&cos, proxies.id_count(), tau))
}

pub(crate) fn ratio_from_cosines(cos: &[f64], id_count: usize, tau: f64) -> f64 {
    let max = cos.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut id_sum = 0.0;
    let mut total = 0.0;
    for (i, c) in cos.iter().enumerate() {
        let e = ((c - max) / tau).exp();
        if i < id_count {
            id_sum += e;
        }
        total += e;
    }
    id_sum / total
}

/// Fused text/image score `s_nl + lambda * s_adaptive`.
#[inline]
pub fn combined_score(s_nl: f64, s_adaptive: f64, lambda: f64) -> f64 {
    s_nl + lambda * s_adaptive
}

/// Binary entropy of an ID probability, in nats.
pub fn binary_entropy(s: f64) -> f64 {
    let s = s.clamp(ENTROPY_CLAMP, 1.0 - ENTROPY_CLAMP);
    -s * s.ln() - (1.0 - s) * (-s).ln_1p()
}
