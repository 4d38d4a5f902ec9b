//! Sweeps memory length and fusion weight on a reduced synthetic stream.
//!
//! cargo run --release --example hyperparameter_sweep

use adaneg::pipeline::{sweep, synthesize_dataset, RunConfig, SweepGrid, SyntheticSpec};

fn main() -> adaneg::Result<()> {
    let spec = SyntheticSpec { n_id: 2000, n_ood: 2000, ..SyntheticSpec::default() };
    let dataset = synthesize_dataset(&spec)?;
    let grid = SweepGrid {
        mem_len: vec![1, 5, 10],
        lambda: vec![0.05, 0.1, 0.5],
        ..SweepGrid::default()
    };
    println!("   L  lambda   AUROC   FPR95");
    for cell in sweep(&RunConfig::default(), &grid, &dataset) {
        match cell.result {
            Ok(summary) => {
                let r = summary.report.unwrap();
                println!("{:>4}  {:>6}  {:.4}  {:.4}", cell.config.mem_len, cell.config.lambda, r.auroc, r.fpr95);
            }
            Err(e) => println!("{:>4}  {:>6}  failed: {e}", cell.config.mem_len, cell.config.lambda),
        }
    }
    Ok(())
}
