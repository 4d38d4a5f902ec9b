//! Desk-scale synthetic embeddings.
//!
//! Text proxies are drawn uniformly on the unit sphere of the first
//! `dim - ood_subspace_dim` coordinates, optionally pulled toward a shared
//! direction so that label embeddings are correlated. Every sample is further
//! mixed with a shared image-only direction orthogonal to all text (a modality
//! gap), which keeps image-text cosines small relative to image-image ones.
//! ID class centers may also carry a visual component inside the OOD subspace,
//! so some OOD clusters resemble ID classes in image space but not in text. Misaligned OOD cluster centers live
//! in the remaining `ood_subspace_dim` coordinates, so they are exactly
//! orthogonal to every text proxy; aligned OOD clusters are centered on
//! randomly chosen negative proxies. Samples are drawn from von Mises-Fisher
//! distributions around their class proxy or cluster center.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::embeddings::{dot, normalize, normalize_in_place, Dataset, EmbeddingVector, GroundTruth, ProxyMatrix};
use crate::error::{Error, Result};

/// Dataset tag for OOD samples from clusters centered on negative proxies.
pub const ALIGNED_TAG: &str = "aligned";
/// Dataset tag for OOD samples from clusters orthogonal to all text proxies.
pub const MISALIGNED_TAG: &str = "misaligned";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub id_classes: usize,
    pub neg_classes: usize,
    pub dim: usize,
    /// Coordinates reserved for misaligned OOD centers.
    pub ood_subspace_dim: usize,
    /// Pairwise cosine shared by all text proxies (0 means independent).
    pub text_correlation: f64,
    /// Weight of the shared image-only direction in every sample, in [0, 1).
    pub modality_gap: f64,
    /// vMF concentration of ID samples around their class proxy; `inf` puts
    /// every sample exactly on the proxy.
    pub id_concentration: f64,
    /// Weight of a per-class visual direction (inside the OOD subspace) in
    /// each ID class center, in [0, 1).
    pub id_visual_weight: f64,
    pub ood_clusters: usize,
    pub ood_concentration: f64,
    /// Fraction of OOD clusters centered on a negative proxy.
    pub alignment_fraction: f64,
    pub n_id: usize,
    pub n_ood: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            id_classes: 50,
            neg_classes: 200,
            dim: 64,
            ood_subspace_dim: 2,
            text_correlation: 0.83,
            modality_gap: 0.90,
            id_concentration: 200.0,
            id_visual_weight: 0.20,
            ood_clusters: 50,
            ood_concentration: 20.0,
            alignment_fraction: 0.0,
            n_id: 5000,
            n_ood: 5000,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigInvalid(msg));
        if self.id_classes == 0 || self.neg_classes == 0 {
            return bad("need at least one ID and one negative class".into());
        }
        if self.dim < 2 {
            return bad(format!("dim must be >= 2, got {}", self.dim));
        }
        if self.ood_subspace_dim >= self.dim {
            return bad(format!(
                "ood_subspace_dim {} leaves no room for text proxies in dim {}",
                self.ood_subspace_dim, self.dim
            ));
        }
        if !(0.0..=1.0).contains(&self.alignment_fraction) {
            return bad(format!("alignment_fraction must be in [0, 1], got {}", self.alignment_fraction));
        }
        if !(0.0..1.0).contains(&self.text_correlation) {
            return bad(format!("text_correlation must be in [0, 1), got {}", self.text_correlation));
        }
        if !(0.0..1.0).contains(&self.modality_gap) {
            return bad(format!("modality_gap must be in [0, 1), got {}", self.modality_gap));
        }
        if !(0.0..1.0).contains(&self.id_visual_weight) {
            return bad(format!("id_visual_weight must be in [0, 1), got {}", self.id_visual_weight));
        }
        if self.id_visual_weight > 0.0 && self.ood_subspace_dim == 0 {
            return bad("id_visual_weight needs ood_subspace_dim >= 1".into());
        }
        if self.dim - self.ood_subspace_dim < 3 {
            return bad("text proxies need at least 3 coordinates".into());
        }
        if self.n_ood > 0 && self.ood_clusters == 0 {
            return bad("OOD samples requested without OOD clusters".into());
        }
        if self.misaligned_clusters() > 0 && self.ood_subspace_dim == 0 {
            return bad("misaligned OOD clusters need ood_subspace_dim >= 1".into());
        }
        for (name, k) in [
            ("id_concentration", self.id_concentration),
            ("ood_concentration", self.ood_concentration),
        ] {
            if !(k >= 0.0) {
                return bad(format!("{name} must be >= 0, got {k}"));
            }
        }
        Ok(())
    }

    pub fn aligned_clusters(&self) -> usize {
        (self.alignment_fraction * self.ood_clusters as f64).round() as usize
    }

    pub fn misaligned_clusters(&self) -> usize {
        self.ood_clusters - self.aligned_clusters()
    }
}

/// von Mises-Fisher distribution on the unit sphere (Wood's rejection sampler).
#[derive(Debug, Clone)]
pub struct VonMisesFisher {
    mean: Vec<f64>,
    kappa: f64,
    // Wood's constants
    b: f64,
    x0: f64,
    c: f64,
    beta: Option<Beta<f64>>,
}

impl VonMisesFisher {
    /// `mean` must be unit-norm with dimension >= 2; `kappa >= 0` (may be `inf`).
    pub fn new(mean: &[f64], kappa: f64) -> Result<Self> {
        let d = mean.len();
        if d < 2 {
            return Err(Error::ConfigInvalid("vMF needs dimension >= 2".into()));
        }
        if !(kappa >= 0.0) {
            return Err(Error::ConfigInvalid(format!("vMF kappa must be >= 0, got {kappa}")));
        }
        let mean = normalize(mean)?.into_inner();
        let m1 = (d - 1) as f64;
        let (b, x0, c, beta) = if kappa.is_finite() {
            let b = m1 / (2.0 * kappa + (4.0 * kappa * kappa + m1 * m1).sqrt());
            let x0 = (1.0 - b) / (1.0 + b);
            let c = kappa * x0 + m1 * (1.0 - x0 * x0).ln();
            let beta = Beta::new(m1 / 2.0, m1 / 2.0)
                .map_err(|e| Error::ConfigInvalid(format!("vMF beta: {e}")))?;
            (b, x0, c, Some(beta))
        } else {
            (0.0, 1.0, 0.0, None)
        };
        Ok(VonMisesFisher {
            mean,
            kappa,
            b,
            x0,
            c,
            beta,
        })
    }

    fn sample_cosine<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let Some(beta) = &self.beta else {
            return 1.0;
        };
        let m1 = (self.mean.len() - 1) as f64;
        loop {
            let z: f64 = beta.sample(rng);
            let w = (1.0 - (1.0 + self.b) * z) / (1.0 - (1.0 - self.b) * z);
            let u: f64 = rng.random();
            if self.kappa * w + m1 * (1.0 - self.x0 * w).ln() - self.c >= u.ln() {
                return w;
            }
        }
    }
}

impl Distribution<Vec<f64>> for VonMisesFisher {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let w = self.sample_cosine(rng);
        if w >= 1.0 {
            return self.mean.clone();
        }
        // uniform direction in the tangent space of the mean
        let tangent = loop {
            let mut g: Vec<f64> = (0..self.mean.len()).map(|_| rng.sample(StandardNormal)).collect();
            let proj = dot(&g, &self.mean);
            g.iter_mut().zip(&self.mean).for_each(|(x, m)| *x -= proj * m);
            if let Ok(t) = normalize(&g) {
                break t;
            }
        };
        let s = (1.0 - w * w).max(0.0).sqrt();
        let v: Vec<f64> = self.mean.iter().zip(tangent.iter()).map(|(m, t)| w * m + s * t).collect();
        // renormalize to absorb rounding
        normalize(&v).map(EmbeddingVector::into_inner).unwrap_or(v)
    }
}

fn unit_in_block<R: Rng + ?Sized>(rng: &mut R, dim: usize, block: std::ops::Range<usize>) -> Vec<f64> {
    loop {
        let mut v = vec![0.0; dim];
        for x in &mut v[block.clone()] {
            *x = rng.sample(StandardNormal);
        }
        if let Ok(u) = normalize(&v) {
            return u.into_inner();
        }
    }
}

fn add_modality_gap(v: &mut [f64], gap: f64) {
    if gap > 0.0 {
        let keep = (1.0 - gap * gap).sqrt();
        v.iter_mut().for_each(|x| *x *= keep);
        v[1] += gap;
        normalize_in_place(v);
    }
}

/// Generates proxies, a shuffled test stream and its ground truth. The same
/// spec (including seed) always yields the identical dataset.
pub fn synthesize_dataset(spec: &SyntheticSpec) -> Result<Dataset> {
    synthesize_with_ood_centers(spec).map(|(ds, _)| ds)
}

/// Like [`synthesize_dataset`], also returning the image-space center of every
/// OOD cluster (the closest thing synthetic data has to OOD label embeddings).
pub fn synthesize_with_ood_centers(spec: &SyntheticSpec) -> Result<(Dataset, Vec<EmbeddingVector>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.dim;
    // coordinate 0 is the shared text direction, coordinate 1 the image one
    let text_block = 2..d - spec.ood_subspace_dim;
    let ood_block = d - spec.ood_subspace_dim..d;
    let rho = spec.text_correlation;
    let text_row = |rng: &mut ChaCha8Rng| {
        let mut r = unit_in_block(rng, d, text_block.clone());
        r.iter_mut().for_each(|x| *x *= (1.0 - rho).sqrt());
        r[0] = rho.sqrt();
        r
    };

    let id_rows: Vec<Vec<f64>> = (0..spec.id_classes).map(|_| text_row(&mut rng)).collect();
    let neg_rows: Vec<Vec<f64>> = (0..spec.neg_classes).map(|_| text_row(&mut rng)).collect();
    let proxies = ProxyMatrix::from_raw(&id_rows, &neg_rows)?;

    let aligned = spec.aligned_clusters();
    let centers: Vec<(Vec<f64>, &str)> = (0..spec.ood_clusters)
        .map(|k| {
            if k < aligned {
                let j = rng.random_range(0..spec.neg_classes);
                (neg_rows[j].clone(), ALIGNED_TAG)
            } else {
                (unit_in_block(&mut rng, d, ood_block.clone()), MISALIGNED_TAG)
            }
        })
        .collect();

    let w = spec.id_visual_weight;
    let id_dists = id_rows
        .iter()
        .map(|r| {
            if w == 0.0 {
                return VonMisesFisher::new(r, spec.id_concentration);
            }
            let u = unit_in_block(&mut rng, d, ood_block.clone());
            let center: Vec<f64> = r.iter().zip(&u).map(|(t, u)| (1.0 - w * w).sqrt() * t + w * u).collect();
            VonMisesFisher::new(&center, spec.id_concentration)
        })
        .collect::<Result<Vec<_>>>()?;
    let ood_dists = centers
        .iter()
        .map(|(c, _)| VonMisesFisher::new(c, spec.ood_concentration))
        .collect::<Result<Vec<_>>>()?;

    let mut samples: Vec<(Vec<f64>, GroundTruth)> = Vec::with_capacity(spec.n_id + spec.n_ood);
    for i in 0..spec.n_id {
        let class = i % spec.id_classes;
        samples.push((id_dists[class].sample(&mut rng), GroundTruth::Id { class }));
    }
    for i in 0..spec.n_ood {
        let k = i % spec.ood_clusters;
        let tag = GroundTruth::Ood {
            dataset: Some(centers[k].1.to_string()),
        };
        samples.push((ood_dists[k].sample(&mut rng), tag));
    }
    for (v, _) in &mut samples {
        add_modality_gap(v, spec.modality_gap);
    }
    samples.shuffle(&mut rng);
    let ood_centers = centers
        .into_iter()
        .map(|(mut c, _)| {
            add_modality_gap(&mut c, spec.modality_gap);
            EmbeddingVector::from_unit_unchecked(c)
        })
        .collect();

    let (stream, truth): (Vec<_>, Vec<_>) = samples
        .into_iter()
        .map(|(v, t)| (EmbeddingVector::from_unit_unchecked(v), t))
        .unzip();
    let ds = Dataset::new(
        (0..spec.id_classes).map(|i| format!("id_{i}")).collect(),
        (0..spec.neg_classes).map(|j| format!("neg_{j}")).collect(),
        proxies,
        stream,
        Some(truth),
    )?;
    Ok((ds, ood_centers))
}
