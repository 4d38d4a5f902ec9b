//! Hyperparameter sweeps, mixture-ratio and ordering experiments. Every cell
//! is an independent run with its own fresh memory bank, so cells run in
//! parallel.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Mode, RunConfig};
use super::detector::{run_dataset, stream_order, Detector};
use crate::embeddings::{Dataset, EmbeddingVector};
use crate::error::{Error, Result};
use crate::metrics::{isor, MetricReport};

/// Values to sweep per hyperparameter. An empty list keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SweepGrid {
    pub gamma: Vec<f64>,
    pub gap: Vec<f64>,
    pub beta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mem_len: Vec<usize>,
    pub mode: Vec<Mode>,
}

impl SweepGrid {
    /// Cartesian product of the grid applied on top of `base`.
    pub fn configs(&self, base: &RunConfig) -> Vec<RunConfig> {
        fn axis<T: Copy>(values: &[T], base: T) -> Vec<T> {
            if values.is_empty() {
                vec![base]
            } else {
                values.to_vec()
            }
        }
        let mut out = Vec::new();
        for &gamma in &axis(&self.gamma, base.gamma) {
            for &gap in &axis(&self.gap, base.gap) {
                for &beta in &axis(&self.beta, base.beta) {
                    for &lambda in &axis(&self.lambda, base.lambda) {
                        for &mem_len in &axis(&self.mem_len, base.mem_len) {
                            for &mode in &axis(&self.mode, base.mode) {
                                out.push(RunConfig {
                                    gamma,
                                    gap,
                                    beta,
                                    lambda,
                                    mem_len,
                                    mode,
                                    ..*base
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub report: Option<MetricReport>,
    /// Samples whose caching decision was not `Skip`.
    pub cache_attempts: usize,
    pub occupancy: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub config: RunConfig,
    /// A failing cell carries its error message; the rest of the sweep still runs.
    pub result: std::result::Result<CellSummary, String>,
}

pub fn sweep(base: &RunConfig, grid: &SweepGrid, dataset: &Dataset) -> Vec<SweepCell> {
    grid.configs(base)
        .into_par_iter()
        .map(|config| {
            let result = run_dataset(&config, dataset)
                .map(|out| CellSummary {
                    cache_attempts: out.cache_attempts(),
                    occupancy: out.occupancy.total(),
                    report: out.report,
                })
                .map_err(|e| e.to_string());
            SweepCell { config, result }
        })
        .collect()
}

/// Stream positions of the ID and OOD samples kept for an `ID:OOD = ratio`
/// subsample, preserving stream order. Takes the largest realizable subset,
/// using the earliest samples of each kind.
pub fn subsample_to_ratio(dataset: &Dataset, ratio: f64) -> Result<Vec<usize>> {
    let insufficient = |reason: String| Error::InsufficientSamples { ratio, reason };
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(insufficient("ratio must be positive".into()));
    }
    let truth = dataset
        .ground_truth
        .as_ref()
        .ok_or_else(|| insufficient("dataset has no ground truth".into()))?;
    let n_id = truth.iter().filter(|t| t.is_id()).count();
    let n_ood = truth.len() - n_id;
    let (keep_id, keep_ood) = if n_id as f64 >= ratio * n_ood as f64 {
        ((ratio * n_ood as f64).round() as usize, n_ood)
    } else {
        (n_id, (n_id as f64 / ratio).round() as usize)
    };
    if keep_id == 0 || keep_ood == 0 || keep_id > n_id || keep_ood > n_ood {
        return Err(insufficient(format!(
            "{n_id} ID and {n_ood} OOD samples available"
        )));
    }
    let (mut ids, mut oods) = (0, 0);
    Ok(truth
        .iter()
        .enumerate()
        .filter(|(_, t)| {
            let slot = if t.is_id() { &mut ids } else { &mut oods };
            let limit = if t.is_id() { keep_id } else { keep_ood };
            *slot += 1;
            *slot <= limit
        })
        .map(|(i, _)| i)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureCell {
    pub ratio: f64,
    pub n_id: usize,
    pub n_ood: usize,
    pub without_adagap: MetricReport,
    pub with_adagap: MetricReport,
}

/// For each ID:OOD ratio, subsamples the stream and runs with and without
/// AdaGap. All ratios are checked before any run starts.
pub fn mixture_experiment(
    ratios: &[f64],
    config: &RunConfig,
    dataset: &Dataset,
) -> Result<Vec<MixtureCell>> {
    let subsets = ratios
        .iter()
        .map(|&r| subsample_to_ratio(dataset, r).map(|idx| (r, dataset.select(&idx))))
        .collect::<Result<Vec<_>>>()?;
    subsets
        .into_par_iter()
        .map(|(ratio, subset)| {
            let base = run_dataset(&config.with_adagap(false), &subset)?;
            let ada = run_dataset(&config.with_adagap(true), &subset)?;
            let (n_id, n_ood) = subset.counts().unwrap_or_default();
            Ok(MixtureCell {
                ratio,
                n_id,
                n_ood,
                without_adagap: base.report.expect("subset has ground truth"),
                with_adagap: ada.report.expect("subset has ground truth"),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingRun {
    pub seed: u64,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingReport {
    pub runs: Vec<OrderingRun>,
    /// max - min AUROC across seeds.
    pub auroc_spread: f64,
    pub fpr95_spread: f64,
}

/// Shuffles the stream once per seed and runs each ordering independently.
pub fn ordering_experiment(
    config: &RunConfig,
    dataset: &Dataset,
    seeds: &[u64],
) -> Result<OrderingReport> {
    if seeds.len() < 2 {
        return Err(Error::ConfigInvalid(
            "ordering experiment needs at least two seeds".into(),
        ));
    }
    if dataset.ground_truth.is_none() {
        return Err(Error::EmptyInput("ordering experiment needs ground truth"));
    }
    let runs = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = RunConfig {
                seed: Some(seed),
                ..*config
            };
            let report = run_dataset(&cfg, dataset)?
                .report
                .expect("dataset has ground truth");
            Ok(OrderingRun { seed, report })
        })
        .collect::<Result<Vec<_>>>()?;
    let spread = |f: fn(&MetricReport) -> f64| {
        let vals = runs.iter().map(|r| f(&r.report));
        let max = vals.clone().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.fold(f64::INFINITY, f64::min);
        max - min
    };
    Ok(OrderingReport {
        auroc_spread: spread(|r| r.auroc),
        fpr95_spread: spread(|r| r.fpr95),
        runs,
    })
}

/// ISOR of the fixed negative text proxies versus the task-adaptive negative
/// proxies left in memory after a full run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsorReport {
    pub text_negative: Vec<f64>,
    pub adaptive_negative: Vec<f64>,
    pub text_negative_mean: f64,
    pub adaptive_negative_mean: f64,
}

pub fn isor_experiment(
    config: &RunConfig,
    dataset: &Dataset,
    ood_labels: &[EmbeddingVector],
) -> Result<IsorReport> {
    let mut detector = Detector::new(*config, dataset.proxies.clone())?;
    for i in stream_order(dataset.len(), config.seed) {
        detector.process(&dataset.stream[i])?;
    }
    let text = &dataset.proxies;
    let adaptive = detector.memory().task_adaptive_proxies(text)?;
    let id_rows: Vec<&[f64]> = text.rows().take(text.id_count()).collect();
    let ood: Vec<&[f64]> = ood_labels.iter().map(|v| v.as_slice()).collect();
    let score = |m: &crate::embeddings::ProxyMatrix| -> Result<Vec<f64>> {
        m.rows()
            .skip(m.id_count())
            .map(|row| isor(row, &id_rows, &ood, config.tau))
            .collect()
    };
    let text_negative = score(text)?;
    let adaptive_negative = score(&adaptive)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(IsorReport {
        text_negative_mean: mean(&text_negative),
        adaptive_negative_mean: mean(&adaptive_negative),
        text_negative,
        adaptive_negative,
    })
}
