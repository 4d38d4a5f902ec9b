//! AUROC, FPR at 95% TPR and ID accuracy on hand-built score populations.
//!
//! cargo run --example detection_metrics

use adaneg::metrics::{auroc, fpr_at_95_tpr, id_accuracy, ScoredPopulation};

fn main() -> adaneg::Result<()> {
    let cases = [
        ("separated", ScoredPopulation::new(vec![0.9, 0.8, 0.95, 0.7], vec![0.1, 0.2, 0.3])),
        ("overlapping", ScoredPopulation::new(vec![0.9, 0.6, 0.4, 0.8], vec![0.5, 0.3, 0.7])),
        ("identical", ScoredPopulation::new(vec![0.5; 10], vec![0.5; 10])),
    ];
    for (name, pop) in &cases {
        println!("{name:>11}: AUROC {:.4}  FPR95 {:.4}", auroc(pop)?, fpr_at_95_tpr(pop)?);
    }
    println!("ID accuracy: {:.2}", id_accuracy(&[0, 1, 2, 7], &[0, 1, 1, 3])?);
    Ok(())
}
