//! Writes a small dataset as EMB1 files plus a JSON manifest, reads it back
//! and scores the reloaded stream.
//!
//! cargo run --release --example embedding_files

use adaneg::embeddings::{load_embedding_file, Dataset, FileRole};
use adaneg::pipeline::{run_dataset, synthesize_dataset, RunConfig, SyntheticSpec};

fn main() -> adaneg::Result<()> {
    let spec = SyntheticSpec { n_id: 500, n_ood: 500, ..SyntheticSpec::default() };
    let dataset = synthesize_dataset(&spec)?;
    let dir = std::env::temp_dir().join("adaneg-embedding-files");
    let manifest_path = dataset.save(&dir)?;
    println!("manifest at {}", manifest_path.display());

    let manifest = adaneg::embeddings::DatasetManifest::load(&manifest_path)?;
    for (role, file) in &manifest.files {
        let emb = load_embedding_file(dir.join(file))?;
        println!("{role:?}: {} x {} (unit flag {})", emb.count(), emb.dim(), emb.claims_unit_norm());
    }
    let test_file = &manifest.files[&FileRole::TestStream];
    println!("test rows stored in {}", test_file.display());

    let reloaded = Dataset::load(&manifest_path)?;
    let before = run_dataset(&RunConfig::default(), &dataset)?.report.unwrap();
    let after = run_dataset(&RunConfig::default(), &reloaded)?.report.unwrap();
    // f32 storage rounds the features, so scores agree only approximately
    println!("AUROC in memory {:.4}, after round trip {:.4}", before.auroc, after.auroc);
    Ok(())
}
