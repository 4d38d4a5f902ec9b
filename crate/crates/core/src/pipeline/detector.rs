use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{CacheOrder, FuseWith, Mode, RunConfig};
use crate::adagap::{adaptive_gaps, MixRatioEstimator};
use crate::embeddings::{normalize, Dataset, EmbeddingVector, GroundTruth, ProxyMatrix};
use crate::error::{Error, Result};
use crate::memory::{gap_decision, CacheDecision, CacheKind, OccupancyReport, TaskAwareMemory};
use crate::metrics::MetricReport;
use crate::scoring::{binary_entropy, combined_score, id_mass, proxy_score, pseudo_label, softmax_cosines};

/// Everything computed for one test sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRecord {
    /// Position of the sample in the original (unshuffled) stream.
    pub index: usize,
    pub truth: Option<GroundTruth>,
    pub s_nl: f64,
    pub s_ta: Option<f64>,
    pub s_sa: Option<f64>,
    pub s_all: f64,
    pub pseudo_label: usize,
    pub cache: CacheDecision,
    /// Mix ratio used for the caching decision (AdaGap runs only).
    pub mr: Option<f64>,
}

/// Streaming detector: owns the memory bank and the mix-ratio estimator for
/// one test stream.
#[derive(Debug, Clone)]
pub struct Detector {
    config: RunConfig,
    proxies: ProxyMatrix,
    memory: TaskAwareMemory,
    estimator: Option<MixRatioEstimator>,
    // task-adaptive proxies only change when the memory does
    ta_cache: Option<ProxyMatrix>,
    processed: usize,
}

impl Detector {
    pub fn new(config: RunConfig, proxies: ProxyMatrix) -> Result<Self> {
        config.validate()?;
        let memory = TaskAwareMemory::for_proxies(&proxies, config.mem_len)?;
        let estimator = config
            .adagap
            .enabled
            .then(|| MixRatioEstimator::new(config.adagap.queue_len));
        Ok(Detector {
            config,
            proxies,
            memory,
            estimator,
            ta_cache: None,
            processed: 0,
        })
    }

    /// Starts from an existing memory bank (e.g. a loaded snapshot).
    pub fn with_memory(mut self, memory: TaskAwareMemory) -> Result<Self> {
        if memory.classes() != self.proxies.len()
            || memory.dim() != self.proxies.dim()
            || memory.len() != self.config.mem_len
        {
            return Err(Error::DimensionMismatch {
                expected: self.proxies.len() * self.config.mem_len * self.proxies.dim(),
                found: memory.classes() * memory.len() * memory.dim(),
            });
        }
        self.memory = memory;
        self.ta_cache = None;
        Ok(self)
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn proxies(&self) -> &ProxyMatrix {
        &self.proxies
    }

    pub fn memory(&self) -> &TaskAwareMemory {
        &self.memory
    }

    pub fn mix_ratio(&self) -> Option<f64> {
        self.estimator.as_ref().map(MixRatioEstimator::mix_ratio)
    }

    /// Normalizes `raw` and processes it.
    pub fn process_raw(&mut self, raw: &[f64]) -> Result<SampleRecord> {
        let v = normalize(raw)?;
        self.process(&v)
    }

    /// Processes the next sample of the stream.
    pub fn process(&mut self, v: &EmbeddingVector) -> Result<SampleRecord> {
        let index = self.processed;
        self.process_indexed(index, v)
    }

    fn process_indexed(&mut self, index: usize, v: &EmbeddingVector) -> Result<SampleRecord> {
        let cfg = self.config;
        let c = self.proxies.id_count();

        let cos = self.proxies.cosines(v)?;
        let posteriors = softmax_cosines(&cos, cfg.tau);
        let s_nl = id_mass(&posteriors, c);
        let ood_mass: f64 = posteriors[c..].iter().sum();

        let mr = self.estimator.as_ref().map(MixRatioEstimator::mix_ratio);
        let (neg_gap, pos_gap) = match mr {
            Some(mr) => adaptive_gaps(cfg.gap, mr),
            None => (cfg.gap, cfg.gap),
        };
        let kind = gap_decision(s_nl, ood_mass, cfg.gamma, neg_gap, pos_gap);
        let label = pseudo_label(&posteriors, c, s_nl < cfg.gamma);
        let cache = match kind {
            CacheKind::Skip => CacheDecision::SKIP,
            _ => CacheDecision {
                kind,
                target_class: Some(label),
            },
        };
        let entropy = binary_entropy(s_nl);

        if cfg.order == CacheOrder::CacheThenScore {
            self.cache(cache, v, entropy)?;
        }

        let need_ta = matches!(cfg.mode, Mode::Ta | Mode::All);
        let need_sa = matches!(cfg.mode, Mode::Sa | Mode::All);
        let s_ta = if need_ta {
            if self.ta_cache.is_none() {
                self.ta_cache = Some(self.memory.task_adaptive_proxies(&self.proxies)?);
            }
            Some(proxy_score(v, self.ta_cache.as_ref().unwrap(), cfg.tau)?)
        } else {
            None
        };
        let s_sa = if need_sa {
            let sa = self.memory.sample_adaptive_proxies(&self.proxies, v, cfg.beta)?;
            Some(proxy_score(v, &sa, cfg.tau)?)
        } else {
            None
        };
        let s_all = match cfg.mode {
            Mode::Nl => s_nl,
            Mode::Ta => s_ta.unwrap(),
            Mode::Sa => s_sa.unwrap(),
            Mode::All => {
                let adaptive = match cfg.fuse {
                    FuseWith::Sa => s_sa.unwrap(),
                    FuseWith::Ta => s_ta.unwrap(),
                };
                combined_score(s_nl, adaptive, cfg.lambda)
            }
        };

        if cfg.order == CacheOrder::ScoreThenCache {
            self.cache(cache, v, entropy)?;
        }
        if let Some(est) = self.estimator.as_mut() {
            est.record_score(s_nl, cfg.gamma, cfg.gap, cfg.adagap.estimate);
        }
        self.processed += 1;

        Ok(SampleRecord {
            index,
            truth: None,
            s_nl,
            s_ta,
            s_sa,
            s_all,
            pseudo_label: label,
            cache,
            mr,
        })
    }

    fn cache(&mut self, decision: CacheDecision, v: &[f64], entropy: f64) -> Result<()> {
        if let Some(class) = decision.target_class {
            if self.memory.insert(class, v, entropy)?.changed() {
                self.ta_cache = None;
            }
        }
        Ok(())
    }
}

/// Result of processing a whole stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutput {
    /// One record per sample, in processing order.
    pub records: Vec<SampleRecord>,
    /// Present when ground truth was supplied.
    pub report: Option<MetricReport>,
    pub occupancy: OccupancyReport,
}

impl RunOutput {
    /// Number of samples whose caching decision was not `Skip`.
    pub fn cache_attempts(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.cache.kind != CacheKind::Skip)
            .count()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.s_all).collect()
    }
}

/// Runs the detector over `stream` with a fresh memory bank. If
/// `config.seed` is set the stream is shuffled first; record indices always
/// refer to the original positions. Ground truth is only read to attach tags
/// and compute metrics.
pub fn run_stream(
    config: &RunConfig,
    proxies: &ProxyMatrix,
    stream: &[EmbeddingVector],
    ground_truth: Option<&[GroundTruth]>,
) -> Result<RunOutput> {
    if let Some(t) = ground_truth {
        if t.len() != stream.len() {
            return Err(Error::LengthMismatch {
                left: t.len(),
                right: stream.len(),
            });
        }
    }
    if let Some(v) = stream.iter().find(|v| v.dim() != proxies.dim()) {
        return Err(Error::DimensionMismatch {
            expected: proxies.dim(),
            found: v.dim(),
        });
    }

    let order = stream_order(stream.len(), config.seed);
    let mut detector = Detector::new(*config, proxies.clone())?;
    let mut records = Vec::with_capacity(stream.len());
    for &i in &order {
        let mut rec = detector.process_indexed(i, &stream[i])?;
        rec.truth = ground_truth.map(|t| t[i].clone());
        records.push(rec);
    }

    let report = match ground_truth {
        Some(_) => Some(evaluate_records(&records)?),
        None => None,
    };
    Ok(RunOutput {
        records,
        report,
        occupancy: detector.memory.occupancy_report(),
    })
}

/// Processing order of a stream of `len` samples under an optional shuffle seed.
pub(crate) fn stream_order(len: usize, seed: Option<u64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    if let Some(seed) = seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    order
}

/// Metric report over `s_all` and pseudo-labels; every record needs a truth tag.
pub fn evaluate_records(records: &[SampleRecord]) -> Result<MetricReport> {
    let truth: Vec<GroundTruth> = records
        .iter()
        .map(|r| r.truth.clone().ok_or(Error::EmptyInput("record without ground truth")))
        .collect::<Result<_>>()?;
    let scores: Vec<f64> = records.iter().map(|r| r.s_all).collect();
    let predicted: Vec<usize> = records.iter().map(|r| r.pseudo_label).collect();
    MetricReport::from_samples(&scores, &truth, &predicted)
}

pub fn run_dataset(config: &RunConfig, dataset: &Dataset) -> Result<RunOutput> {
    run_stream(
        config,
        &dataset.proxies,
        &dataset.stream,
        dataset.ground_truth.as_deref(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::neglabel_score;

    fn toy() -> (ProxyMatrix, Vec<EmbeddingVector>, Vec<GroundTruth>) {
        let proxies = ProxyMatrix::from_raw(
            &[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]],
            &[vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]],
        )
        .unwrap();
        let raw = [
            [0.9, 0.1, 0.0, 0.1],
            [0.1, 0.0, 0.9, 0.2],
            [0.0, 0.95, 0.1, 0.0],
            [0.3, 0.3, 0.3, 0.3],
            [0.1, 0.1, 0.2, 0.9],
            [0.8, 0.3, 0.1, 0.0],
        ];
        let stream = raw.iter().map(|r| normalize(r).unwrap()).collect();
        let truth = vec![
            GroundTruth::Id { class: 0 },
            GroundTruth::ood(),
            GroundTruth::Id { class: 1 },
            GroundTruth::ood(),
            GroundTruth::ood(),
            GroundTruth::Id { class: 0 },
        ];
        (proxies, stream, truth)
    }

    #[test]
    fn nl_mode_scores_are_neglabel() {
        let (p, s, t) = toy();
        let cfg = RunConfig::default().with_mode(Mode::Nl);
        let out = run_stream(&cfg, &p, &s, Some(&t)).unwrap();
        for r in &out.records {
            assert_eq!(r.s_all, r.s_nl);
            assert!((r.s_nl - neglabel_score(&s[r.index], &p, 0.01).unwrap()).abs() < 1e-12);
            assert!(r.s_ta.is_none() && r.s_sa.is_none());
        }
        assert!(out.report.is_some());
    }

    #[test]
    fn all_mode_fuses_sample_adaptive_score() {
        let (p, s, t) = toy();
        let cfg = RunConfig::default();
        let out = run_stream(&cfg, &p, &s, Some(&t)).unwrap();
        for r in &out.records {
            let sa = r.s_sa.unwrap();
            assert!(r.s_ta.is_some());
            assert!((r.s_all - (r.s_nl + 0.1 * sa)).abs() < 1e-9);
        }
        let fuse_ta = RunConfig {
            fuse: FuseWith::Ta,
            ..cfg
        };
        let out = run_stream(&fuse_ta, &p, &s, Some(&t)).unwrap();
        for r in &out.records {
            assert!((r.s_all - (r.s_nl + 0.1 * r.s_ta.unwrap())).abs() < 1e-9);
        }
    }

    #[test]
    fn full_gap_never_caches() {
        let (p, s, t) = toy();
        let cfg = RunConfig {
            gap: 1.0,
            ..RunConfig::default()
        };
        let out = run_stream(&cfg, &p, &s, Some(&t)).unwrap();
        assert_eq!(out.occupancy.total(), 0);
        for r in &out.records {
            assert_eq!(r.cache.kind, CacheKind::Skip);
            assert!((r.s_ta.unwrap() - r.s_nl).abs() < 1e-9);
            assert!((r.s_sa.unwrap() - r.s_nl).abs() < 1e-9);
        }
    }

    #[test]
    fn caches_with_pseudo_labels() {
        let (p, s, _) = toy();
        let mut det = Detector::new(RunConfig::default(), p).unwrap();
        let r = det.process(&s[0]).unwrap();
        assert_eq!(r.cache.kind, CacheKind::CachePositive);
        assert_eq!(r.cache.target_class, Some(0));
        let r = det.process(&s[1]).unwrap();
        assert_eq!(r.cache.kind, CacheKind::CacheNegative);
        assert_eq!(r.cache.target_class, Some(2));
        assert_eq!(det.memory().occupancy(0), 1);
        assert_eq!(det.memory().occupancy(2), 1);
    }

    #[test]
    fn score_then_cache_differs_only_in_order() {
        let (p, s, _) = toy();
        let a = RunConfig::default();
        let b = RunConfig {
            order: CacheOrder::ScoreThenCache,
            ..a
        };
        let out_b = run_stream(&b, &p, &s, None).unwrap();
        // the first sample sees an empty memory when scored before caching
        let first = &out_b.records[0];
        assert!((first.s_sa.unwrap() - first.s_nl).abs() < 1e-9);
        let out_a = run_stream(&a, &p, &s, None).unwrap();
        assert_eq!(out_a.occupancy, out_b.occupancy);
    }

    #[test]
    fn ground_truth_is_not_consulted() {
        let (p, s, t) = toy();
        let cfg = RunConfig {
            seed: Some(3),
            ..RunConfig::default()
        };
        let with = run_stream(&cfg, &p, &s, Some(&t)).unwrap();
        let without = run_stream(&cfg, &p, &s, None).unwrap();
        for (a, b) in with.records.iter().zip(&without.records) {
            assert_eq!(a.index, b.index);
            assert_eq!(a.s_all, b.s_all);
        }
        assert!(without.report.is_none());
    }

    #[test]
    fn adagap_records_mix_ratio() {
        let (p, s, _) = toy();
        let cfg = RunConfig::default().with_adagap(true);
        let out = run_stream(&cfg, &p, &s, None).unwrap();
        assert_eq!(out.records[0].mr, Some(0.5));
        assert!(out.records.iter().all(|r| r.mr.is_some()));
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let (p, s, t) = toy();
        assert!(matches!(
            run_stream(&RunConfig::default(), &p, &s, Some(&t[..2])),
            Err(Error::LengthMismatch { .. })
        ));
        let short = vec![normalize(&[1.0, 0.0]).unwrap()];
        assert!(matches!(
            run_stream(&RunConfig::default(), &p, &short, None),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad = RunConfig {
            gamma: 1.5,
            ..RunConfig::default()
        };
        assert!(matches!(run_stream(&bad, &p, &s, None), Err(Error::ConfigInvalid(_))));
    }
}
