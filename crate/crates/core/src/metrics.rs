//! Evaluation metrics. Higher scores mean "more ID" throughout.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::embeddings::{dot, GroundTruth};
use crate::error::{Error, Result};
use crate::scoring::ratio_from_cosines;

/// ID and OOD score lists for one evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoredPopulation {
    pub id_scores: Vec<f64>,
    pub ood_scores: Vec<f64>,
}

impl ScoredPopulation {
    pub fn new(id_scores: Vec<f64>, ood_scores: Vec<f64>) -> Self {
        ScoredPopulation {
            id_scores,
            ood_scores,
        }
    }

    fn check(&self) -> Result<()> {
        if self.id_scores.is_empty() || self.ood_scores.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        let all = self.id_scores.iter().chain(&self.ood_scores);
        if let Some(row) = all.clone().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteValue { row, col: 0 });
        }
        Ok(())
    }
}

/// Area under the ROC curve via the Mann-Whitney rank sum. Ties count half.
pub fn auroc(pop: &ScoredPopulation) -> Result<f64> {
    pop.check()?;
    let n_id = pop.id_scores.len();
    let n_ood = pop.ood_scores.len();
    let mut all: Vec<(f64, bool)> = pop
        .id_scores
        .iter()
        .map(|&s| (s, true))
        .chain(pop.ood_scores.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    // ranks are 1-based; tie groups share the average rank, which is a
    // half-integer, so the rank sum is exact in f64
    let mut id_rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i + 1;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        let ids_in_group = all[i..j].iter().filter(|x| x.1).count();
        id_rank_sum += avg_rank * ids_in_group as f64;
        i = j;
    }
    let u = id_rank_sum - (n_id * (n_id + 1)) as f64 / 2.0;
    Ok(u / (n_id as f64 * n_ood as f64))
}

/// False-positive rate on OOD at the largest threshold that keeps at least
/// 95% of ID scores at or above it.
pub fn fpr_at_95_tpr(pop: &ScoredPopulation) -> Result<f64> {
    pop.check()?;
    let mut id = pop.id_scores.clone();
    id.sort_by(|a, b| b.total_cmp(a));
    // smallest k with k/n >= 0.95, in integer arithmetic
    let k = (95 * id.len()).div_ceil(100);
    let threshold = id[k - 1];
    let fp = pop.ood_scores.iter().filter(|&&s| s >= threshold).count();
    Ok(fp as f64 / pop.ood_scores.len() as f64)
}

/// Fraction of exact matches.
pub fn id_accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput("no ID samples for accuracy"));
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// ID-similarity-to-OOD ratio of a proxy: the NegLabel score form with the
/// negative block replaced by ground-truth OOD label embeddings and the proxy
/// itself as input. Low values mean the proxy sits closer to the true OOD
/// labels than to the ID labels.
pub fn isor<R: AsRef<[f64]>>(
    proxy: &[f64],
    id_proxies: &[R],
    ood_truth_proxies: &[R],
    tau: f64,
) -> Result<f64> {
    if id_proxies.is_empty() || ood_truth_proxies.is_empty() {
        return Err(Error::EmptyInput("ISOR needs ID and OOD label embeddings"));
    }
    if !(tau > 0.0) {
        return Err(Error::ConfigInvalid(format!("tau must be > 0, got {tau}")));
    }
    let mut cos = Vec::with_capacity(id_proxies.len() + ood_truth_proxies.len());
    for row in id_proxies.iter().chain(ood_truth_proxies) {
        let row = row.as_ref();
        if row.len() != proxy.len() {
            return Err(Error::DimensionMismatch {
                expected: proxy.len(),
                found: row.len(),
            });
        }
        cos.push(dot(proxy, row));
    }
    Ok(ratio_from_cosines(&cos, id_proxies.len(), tau))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetrics {
    pub auroc: f64,
    pub fpr95: f64,
    pub n_ood: usize,
}

/// Summary emitted for every evaluated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auroc: f64,
    pub fpr95: f64,
    /// Share of ID samples both detected as ID and assigned their true class.
    pub id_acc: Option<f64>,
    pub n_id: usize,
    pub n_ood: usize,
    /// ID vs each named OOD dataset; empty when OOD samples carry no dataset name.
    pub per_dataset: BTreeMap<String, DatasetMetrics>,
}

impl MetricReport {
    /// Builds the report from per-sample scores, truth tags and predicted
    /// classes (pseudo-labels; an index `>= C` never matches an ID class).
    pub fn from_samples(scores: &[f64], truth: &[GroundTruth], predicted: &[usize]) -> Result<Self> {
        if scores.len() != truth.len() || predicted.len() != truth.len() {
            return Err(Error::LengthMismatch {
                left: scores.len(),
                right: truth.len(),
            });
        }
        let mut pop = ScoredPopulation::default();
        let mut by_dataset: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let (mut pred_id, mut true_id) = (Vec::new(), Vec::new());
        for ((&s, t), &p) in scores.iter().zip(truth).zip(predicted) {
            match t {
                GroundTruth::Id { class } => {
                    pop.id_scores.push(s);
                    pred_id.push(p);
                    true_id.push(*class);
                }
                GroundTruth::Ood { dataset } => {
                    pop.ood_scores.push(s);
                    if let Some(name) = dataset {
                        by_dataset.entry(name.clone()).or_default().push(s);
                    }
                }
            }
        }
        let mut per_dataset = BTreeMap::new();
        for (name, ood) in by_dataset {
            let sub = ScoredPopulation::new(pop.id_scores.clone(), ood);
            per_dataset.insert(
                name,
                DatasetMetrics {
                    auroc: auroc(&sub)?,
                    fpr95: fpr_at_95_tpr(&sub)?,
                    n_ood: sub.ood_scores.len(),
                },
            );
        }
        Ok(MetricReport {
            auroc: auroc(&pop)?,
            fpr95: fpr_at_95_tpr(&pop)?,
            id_acc: id_accuracy(&pred_id, &true_id).ok(),
            n_id: pop.id_scores.len(),
            n_ood: pop.ood_scores.len(),
            per_dataset,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairwise(pop: &ScoredPopulation) -> f64 {
        let mut acc = 0.0;
        for a in &pop.id_scores {
            for b in &pop.ood_scores {
                acc += if a > b {
                    1.0
                } else if a == b {
                    0.5
                } else {
                    0.0
                };
            }
        }
        acc / (pop.id_scores.len() * pop.ood_scores.len()) as f64
    }

    #[test]
    fn auroc_examples() {
        let p = ScoredPopulation::new(vec![0.9, 0.8], vec![0.2, 0.1]);
        assert_eq!(auroc(&p).unwrap(), 1.0);
        let p = ScoredPopulation::new(vec![0.9, 0.7, 0.4], vec![0.8, 0.3]);
        assert!((auroc(&p).unwrap() - 4.0 / 6.0).abs() < 1e-15);
        let p = ScoredPopulation::new(vec![0.3, 0.3, 0.9, 0.1], vec![0.9, 0.1, 0.3, 0.3]);
        assert_eq!(auroc(&p).unwrap(), 0.5);
        assert!(matches!(
            auroc(&ScoredPopulation::new(vec![], vec![1.0])),
            Err(Error::EmptyPopulation)
        ));
    }

    #[test]
    fn fpr95_examples() {
        let p = ScoredPopulation::new(vec![0.9, 0.8], vec![0.2, 0.1]);
        assert_eq!(fpr_at_95_tpr(&p).unwrap(), 0.0);

        let id: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
        let p = ScoredPopulation::new(id, vec![0.12]);
        assert_eq!(fpr_at_95_tpr(&p).unwrap(), 1.0);

        let same: Vec<f64> = (0..200).map(|i| i as f64 / 200.0).collect();
        let p = ScoredPopulation::new(same.clone(), same);
        assert!((fpr_at_95_tpr(&p).unwrap() - 0.95).abs() <= 1.0 / 200.0);
    }

    #[test]
    fn id_accuracy_examples() {
        assert_eq!(id_accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(id_accuracy(&[0, 0], &[1, 1]).unwrap(), 0.0);
        assert_eq!(id_accuracy(&[1, 2, 3, 4], &[1, 2, 3, 0]).unwrap(), 0.75);
        assert!(matches!(
            id_accuracy(&[1], &[1, 2]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn isor_saturates_toward_the_matching_block() {
        let id = [vec![1.0, 0.0, 0.0]];
        let ood = [vec![0.0, 1.0, 0.0]];
        assert!(isor(&[0.0, 1.0, 0.0], &id, &ood, 0.01).unwrap() < 1e-40);
        assert!(isor(&[1.0, 0.0, 0.0], &id, &ood, 0.01).unwrap() > 1.0 - 1e-12);
        assert!(isor(&[1.0, 0.0], &id, &ood, 0.01).is_err());
    }

    #[test]
    fn report_breaks_down_by_dataset() {
        let truth = vec![
            GroundTruth::Id { class: 0 },
            GroundTruth::Id { class: 1 },
            GroundTruth::Ood {
                dataset: Some("a".into()),
            },
            GroundTruth::Ood {
                dataset: Some("b".into()),
            },
        ];
        let r = MetricReport::from_samples(&[0.9, 0.8, 0.85, 0.1], &truth, &[0, 5, 3, 3]).unwrap();
        assert_eq!((r.n_id, r.n_ood), (2, 2));
        assert_eq!(r.id_acc, Some(0.5));
        assert_eq!(r.per_dataset["a"].auroc, 0.5);
        assert_eq!(r.per_dataset["b"].auroc, 1.0);
        assert_eq!(r.auroc, 0.75);
    }

    fn population() -> impl Strategy<Value = ScoredPopulation> {
        // coarse grid so ties are common
        (
            prop::collection::vec(0u8..20, 1..60),
            prop::collection::vec(0u8..20, 1..60),
        )
            .prop_map(|(a, b)| {
                ScoredPopulation::new(
                    a.into_iter().map(|x| x as f64 / 20.0).collect(),
                    b.into_iter().map(|x| x as f64 / 20.0).collect(),
                )
            })
    }

    proptest! {
        #[test]
        fn rank_auroc_matches_pairwise(pop in population()) {
            prop_assert!((auroc(&pop).unwrap() - pairwise(&pop)).abs() < 1e-12);
        }

        #[test]
        fn auroc_is_antisymmetric(pop in population()) {
            let swapped = ScoredPopulation::new(pop.ood_scores.clone(), pop.id_scores.clone());
            prop_assert!((auroc(&pop).unwrap() + auroc(&swapped).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn auroc_invariant_under_increasing_map(pop in population()) {
            let f = |x: &f64| (5.0 * x).exp() - 3.0;
            let mapped = ScoredPopulation::new(
                pop.id_scores.iter().map(f).collect(),
                pop.ood_scores.iter().map(f).collect(),
            );
            prop_assert!((auroc(&pop).unwrap() - auroc(&mapped).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn fpr95_non_increasing_under_downshift(pop in population(), shift in 0.001f64..1.0) {
            let shifted = ScoredPopulation::new(
                pop.id_scores.clone(),
                pop.ood_scores.iter().map(|s| s - shift).collect(),
            );
            prop_assert!(fpr_at_95_tpr(&shifted).unwrap() <= fpr_at_95_tpr(&pop).unwrap());
        }
    }
}
