//! Measures how well negative proxies line up with the true OOD labels before
//! and after adaptation. Lower ISOR means closer to the OOD labels.
//!
//! cargo run --release --example proxy_alignment

use adaneg::pipeline::{isor_experiment, synthesize_with_ood_centers, RunConfig, SyntheticSpec};

fn main() -> adaneg::Result<()> {
    let (dataset, centers) = synthesize_with_ood_centers(&SyntheticSpec::default())?;
    let rep = isor_experiment(&RunConfig::default(), &dataset, &centers)?;
    println!("mean ISOR, text negatives:     {:.4}", rep.text_negative_mean);
    println!("mean ISOR, adaptive negatives: {:.4}", rep.adaptive_negative_mean);
    let moved = rep
        .text_negative
        .iter()
        .zip(&rep.adaptive_negative)
        .filter(|(t, a)| a < t)
        .count();
    println!("{moved} of {} negative proxies moved toward the OOD labels", rep.text_negative.len());
    Ok(())
}
