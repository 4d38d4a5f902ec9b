//! Zero-shot scoring against fixed text proxies: posteriors, the NegLabel
//! score, pseudo-labels and the entropy used for eviction.
//!
//! cargo run --example neglabel_scoring

use adaneg::embeddings::ProxyMatrix;
use adaneg::scoring::{binary_entropy, class_posteriors, id_mass, neglabel_score, pseudo_label};

fn main() -> adaneg::Result<()> {
    // two ID labels, three negative labels in R^4
    let id = [vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]];
    let neg = [
        vec![0.0, 0.0, 1.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
        vec![0.0, 0.0, 0.7, 0.7],
    ];
    let proxies = ProxyMatrix::from_raw(&id, &neg)?;
    let tau = 0.01;

    let samples = [
        ("near cat", vec![0.95, 0.1, 0.05, 0.0]),
        ("near dog", vec![0.1, 0.9, 0.0, 0.1]),
        ("between", vec![0.5, 0.0, 0.5, 0.0]),
        ("far away", vec![0.0, 0.05, 0.6, 0.8]),
    ];
    for (name, raw) in &samples {
        let v = adaneg::embeddings::normalize(raw)?;
        let post = class_posteriors(v.as_slice(), &proxies, tau)?;
        let s = neglabel_score(v.as_slice(), &proxies, tau)?;
        debug_assert!((s - id_mass(&post, 2)).abs() < 1e-12);
        let label = pseudo_label(&post, 2, s < 0.5);
        println!(
            "{name:>9}: s_nl {s:.4}  pseudo-label {label}  entropy {:.4}",
            binary_entropy(s)
        );
    }
    Ok(())
}
