//! Mix-ratio estimation over a sliding window and the widened caching gap.
//!
//! cargo run --example mix_ratio_gap

use adaneg::adagap::{adaptive_decision, adaptive_gaps, EstimateRule, MixRatioEstimator};

fn main() {
    let (gamma, gap) = (0.5, 0.5);
    let mut est = MixRatioEstimator::new(100);

    // 95 ID-looking scores for every 5 OOD-looking ones
    for i in 0..1000 {
        let s_nl = if i % 20 == 0 { 0.05 } else { 0.93 };
        est.record_score(s_nl, gamma, gap, EstimateRule::Threshold);
    }
    let mr = est.mix_ratio();
    let (neg, pos) = adaptive_gaps(gap, mr);
    println!("window {} / {}, MR {mr:.2}, negative gap {neg:.2}, positive gap {pos:.2}", est.len(), est.capacity());

    for s in [0.01, 0.1, 0.2, 0.5, 0.8, 0.95] {
        println!(
            "s_nl {s:.2}: balanced {:?}, ID-heavy {:?}",
            adaptive_decision(s, gamma, gap, 0.5),
            adaptive_decision(s, gamma, gap, mr)
        );
    }
}
