//! The category-split memory bank: gap-based caching, entropy eviction and
//! the two kinds of adaptive proxies built from cached features.
//!
//! cargo run --example memory_bank

use adaneg::embeddings::{normalize, ProxyMatrix};
use adaneg::memory::{attention_weight, caching_decision, TaskAwareMemory};
use adaneg::scoring::{binary_entropy, neglabel_score, proxy_score};

fn main() -> adaneg::Result<()> {
    let text = ProxyMatrix::from_raw(
        &[vec![1.0, 0.0, 0.0]],
        &[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
    )?;
    let (gamma, gap, tau, beta) = (0.5, 0.5, 0.1, 5.5);
    let mut memory = TaskAwareMemory::for_proxies(&text, 2)?;

    // OOD images in this deployment sit between the two negative labels
    let stream = [
        [0.9, 0.1, 0.0],
        [0.0, 0.7, 0.72],
        [0.05, 0.6, 0.8],
        [0.0, 0.75, 0.65],
        [0.1, 0.68, 0.7],
    ];
    for raw in &stream {
        let v = normalize(raw)?;
        let s = neglabel_score(v.as_slice(), &text, tau)?;
        let kind = caching_decision(s, gamma, gap);
        let class = match kind {
            adaneg::memory::CacheKind::CachePositive => Some(0),
            adaneg::memory::CacheKind::CacheNegative => {
                let c = text.cosines(v.as_slice())?;
                Some(if c[1] >= c[2] { 1 } else { 2 })
            }
            adaneg::memory::CacheKind::Skip => None,
        };
        if let Some(c) = class {
            let outcome = memory.insert(c, v.as_slice(), binary_entropy(s))?;
            println!("s_nl {s:.3} -> {} into class {c}: {outcome:?}", kind.as_str());
        }
    }
    println!("occupancy per class: {:?}", (0..3).map(|c| memory.occupancy(c)).collect::<Vec<_>>());

    let probe = normalize(&[0.02, 0.7, 0.71])?;
    let ta = memory.task_adaptive_proxies(&text)?;
    let sa = memory.sample_adaptive_proxies(&text, probe.as_slice(), beta)?;
    println!("probe s_nl {:.4}", neglabel_score(probe.as_slice(), &text, tau)?);
    println!("probe s_ta {:.4}", proxy_score(probe.as_slice(), &ta, tau)?);
    println!("probe s_sa {:.4}", proxy_score(probe.as_slice(), &sa, tau)?);
    for cos in [1.0, 0.9, 0.5, 0.0] {
        println!("attention weight at cos {cos}: {:.4}", attention_weight(cos, beta));
    }
    Ok(())
}
