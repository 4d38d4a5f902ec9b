//! Reruns the detector under different stream shuffles; the memory depends
//! on arrival order, so the metrics move a little.
//!
//! cargo run --release --example stream_order

use adaneg::pipeline::{ordering_experiment, synthesize_dataset, Mode, RunConfig, SyntheticSpec};

fn main() -> adaneg::Result<()> {
    let spec = SyntheticSpec { n_id: 2000, n_ood: 2000, ..SyntheticSpec::default() };
    let dataset = synthesize_dataset(&spec)?;
    for mode in [Mode::Nl, Mode::All] {
        let name = mode.to_string();
        let rep = ordering_experiment(&RunConfig::default().with_mode(mode), &dataset, &[0, 1, 2, 3, 4])?;
        for run in &rep.runs {
            println!("{name:>4} seed {}: AUROC {:.4} FPR95 {:.4}", run.seed, run.report.auroc, run.report.fpr95);
        }
        println!("{name:>4} spread: AUROC {:.4} FPR95 {:.4}", rep.auroc_spread, rep.fpr95_spread);
    }
    Ok(())
}
