//! Generates the misaligned synthetic benchmark and inspects its geometry:
//! how far OOD centers sit from every text proxy and how samples spread
//! around their centers.
//!
//! cargo run --release --example synthetic_benchmark

use adaneg::embeddings::{dot, GroundTruth};
use adaneg::pipeline::{synthesize_with_ood_centers, SyntheticSpec};

fn main() -> adaneg::Result<()> {
    let spec = SyntheticSpec::default();
    let (dataset, centers) = synthesize_with_ood_centers(&spec)?;
    println!("{spec:#?}");

    let max_text_cos = centers
        .iter()
        .flat_map(|c| dataset.proxies.rows().map(move |t| dot(c.as_slice(), t)))
        .fold(f64::NEG_INFINITY, f64::max);
    println!("largest cosine between an OOD center and a text proxy: {max_text_cos:.4}");

    let truth = dataset.ground_truth.as_ref().unwrap();
    let (mut id_cos, mut n) = (0.0, 0);
    for (v, t) in dataset.stream.iter().zip(truth) {
        if let GroundTruth::Id { class } = t {
            id_cos += dot(v.as_slice(), dataset.proxies.row(*class));
            n += 1;
        }
    }
    println!("mean cosine of ID samples to their own label: {:.4}", id_cos / n as f64);
    Ok(())
}
