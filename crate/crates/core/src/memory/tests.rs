use super::*;
use crate::embeddings::normalize;
use crate::scoring::{neglabel_score, proxy_score};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn unit(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    normalize(&v).unwrap().into_inner()
}

fn text(rng: &mut impl Rng, c: usize, m: usize, d: usize) -> ProxyMatrix {
    let id: Vec<Vec<f64>> = (0..c).map(|_| unit(rng, d)).collect();
    let neg: Vec<Vec<f64>> = (0..m).map(|_| unit(rng, d)).collect();
    ProxyMatrix::from_raw(&id, &neg).unwrap()
}

fn assert_rows_close(a: &ProxyMatrix, b: &ProxyMatrix, tol: f64) {
    assert_eq!(a.len(), b.len());
    for (ra, rb) in a.rows().zip(b.rows()) {
        for (x, y) in ra.iter().zip(rb) {
            assert!((x - y).abs() < tol, "{x} vs {y}");
        }
    }
}

/// Direct oracle: L2(sum of filled slots + text row), ignoring empty slots.
fn ta_oracle(mem: &TaskAwareMemory, text: &ProxyMatrix) -> Vec<Vec<f64>> {
    (0..mem.classes())
        .map(|y| {
            let mut acc = text.row(y).to_vec();
            for (m, _) in mem.entries(y) {
                for (a, x) in acc.iter_mut().zip(m) {
                    *a += x;
                }
            }
            normalize(&acc).unwrap().into_inner()
        })
        .collect()
}

fn sa_oracle(mem: &TaskAwareMemory, text: &ProxyMatrix, v: &[f64], beta: f64) -> Vec<Vec<f64>> {
    (0..mem.classes())
        .map(|y| {
            let mut rows: Vec<&[f64]> = mem.entries(y).map(|(m, _)| m).collect();
            rows.push(text.row(y));
            let mut acc = vec![0.0; v.len()];
            for m in rows {
                let x: f64 = v.iter().zip(m).map(|(a, b)| a * b).sum();
                let w = (-beta * (1.0 - x)).exp();
                for (a, b) in acc.iter_mut().zip(m) {
                    *a += w * b;
                }
            }
            let n: f64 = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
            acc.iter().map(|x| x / n).collect()
        })
        .collect()
}

#[test]
fn fresh_memory_is_empty() {
    let mem = TaskAwareMemory::new(2, 3, 10, 4).unwrap();
    assert_eq!(mem.classes(), 5);
    assert!((0..5).all(|y| mem.occupancy(y) == 0));
    assert!(mem.entropy(4, 9).is_infinite());
    assert!(mem.slot(3, 2).iter().all(|&x| x == 0.0));
    assert!(TaskAwareMemory::new(0, 3, 10, 4).is_err());
    assert!(TaskAwareMemory::new(2, 3, 0, 4).is_err());
}

#[test]
fn footprint_matches_imagenet_configuration() {
    let bytes = footprint_bytes(1000 + 10_000, 10, 512, 4);
    assert_eq!(bytes, 225_280_000);
    let mib = bytes as f64 / (1024.0 * 1024.0);
    // reported as 214.75MB; float32 storage gives 214.84 MiB
    assert!((mib - 214.75).abs() < 0.1, "{mib}");
}

#[test]
fn fresh_memory_proxies_equal_text_proxies() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = text(&mut rng, 2, 3, 4);
    let mem = TaskAwareMemory::for_proxies(&t, 10).unwrap();
    assert_rows_close(&mem.task_adaptive_proxies(&t).unwrap(), &t, 1e-12);
    let v = unit(&mut rng, 4);
    assert_rows_close(&mem.sample_adaptive_proxies(&t, &v, 5.5).unwrap(), &t, 1e-12);
}

#[test]
fn collinear_cache_keeps_proxy() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let t = text(&mut rng, 2, 2, 5);
    let mut mem = TaskAwareMemory::for_proxies(&t, 3).unwrap();
    mem.insert(1, &t.row(1).to_vec(), 0.1).unwrap();
    let ta = mem.task_adaptive_proxies(&t).unwrap();
    for (a, b) in ta.row(1).iter().zip(t.row(1)) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn task_adaptive_matches_direct_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let t = text(&mut rng, 2, 2, 5);
        let mut mem = TaskAwareMemory::for_proxies(&t, 3).unwrap();
        for _ in 0..rng.random_range(0..15) {
            let y = rng.random_range(0..4);
            let e = rng.random_range(0.0..0.7);
            mem.insert(y, &unit(&mut rng, 5), e).unwrap();
        }
        let got = mem.task_adaptive_proxies(&t).unwrap();
        for (y, want) in ta_oracle(&mem, &t).iter().enumerate() {
            for (a, b) in got.row(y).iter().zip(want) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn attention_weight_values() {
    assert_eq!(attention_weight(1.0, 5.5), 1.0);
    assert!((attention_weight(0.0, 5.5) - 0.004_086_771_438_464_067).abs() < 1e-15);
    assert!((attention_weight(0.0, 5.5) - 0.0040868).abs() < 1e-7);
}

#[test]
fn large_beta_concentrates_on_nearest_entry() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let t = text(&mut rng, 1, 1, 8);
    let mut mem = TaskAwareMemory::for_proxies(&t, 4).unwrap();
    let stored: Vec<Vec<f64>> = (0..4).map(|_| unit(&mut rng, 8)).collect();
    for s in &stored {
        mem.insert(1, s, 0.1).unwrap();
    }
    // query close to stored[2]
    let mut q = stored[2].clone();
    q.iter_mut().zip(unit(&mut rng, 8)).for_each(|(a, b)| *a += 0.2 * b);
    let q = normalize(&q).unwrap();
    let sa = mem.sample_adaptive_proxies(&t, &q, 500.0).unwrap();
    let cos: f64 = sa.row(1).iter().zip(&stored[2]).map(|(a, b)| a * b).sum();
    assert!(cos > 0.999, "{cos}");
}

#[test]
fn insert_fills_then_evicts_highest_entropy() {
    let mut mem = TaskAwareMemory::new(1, 1, 3, 2).unwrap();
    let v = [1.0, 0.0];
    assert_eq!(mem.insert(0, &v, 0.3).unwrap(), InsertOutcome::Filled { slot: 0 });
    assert_eq!(mem.occupancy(0), 1);
    assert_eq!(mem.slot(0, 0), &v);
    mem.insert(0, &[0.0, 1.0], 0.69).unwrap();
    mem.insert(0, &[0.6, 0.8], 0.1).unwrap();
    assert_eq!(
        mem.insert(0, &[0.8, 0.6], 0.05).unwrap(),
        InsertOutcome::Replaced { slot: 1 }
    );
    assert_eq!(mem.slot(0, 1), &[0.8, 0.6]);
    assert_eq!(mem.entropy(0, 1), 0.05);
    // equal to the current max (0.3): incumbent stays
    assert_eq!(mem.insert(0, &[0.0, -1.0], 0.3).unwrap(), InsertOutcome::Rejected);
    assert_eq!(mem.slot(0, 0), &v);
    assert_eq!(mem.occupancy(0), 3);
}

#[test]
fn insert_rejects_bad_class_and_dim() {
    let mut mem = TaskAwareMemory::new(1, 1, 3, 2).unwrap();
    assert!(mem.insert(2, &[1.0, 0.0], 0.1).is_err());
    assert!(mem.insert(0, &[1.0, 0.0, 0.0], 0.1).is_err());
}

#[test]
fn caching_decision_gap() {
    assert_eq!(caching_decision(0.5, 0.5, 0.5), CacheKind::Skip);
    assert_eq!(caching_decision(0.2, 0.5, 0.5), CacheKind::CacheNegative);
    assert_eq!(caching_decision(0.25, 0.5, 0.5), CacheKind::Skip);
    assert_eq!(caching_decision(0.75, 0.5, 0.5), CacheKind::CachePositive);
    assert_eq!(caching_decision(0.49, 0.5, 0.0), CacheKind::CacheNegative);
    assert_eq!(caching_decision(0.5, 0.5, 0.0), CacheKind::CachePositive);
    // g = 1 covers [0, 1)
    for s in [0.0, 0.3, 0.999_999] {
        assert_eq!(caching_decision(s, 0.5, 1.0), CacheKind::Skip);
    }
}

#[test]
fn saturated_scores_respect_full_gap() {
    // s_nl rounds to 1.0 but the OOD mass is still positive
    assert_eq!(gap_decision(1.0, 1e-80, 0.5, 1.0, 1.0), CacheKind::Skip);
    assert_eq!(gap_decision(1.0, 1e-80, 0.5, 0.5, 0.5), CacheKind::CachePositive);
    assert_eq!(gap_decision(1e-80, 1.0, 0.5, 1.0, 1.0), CacheKind::Skip);
}

#[test]
fn occupancy_report_counts() {
    let mut mem = TaskAwareMemory::new(2, 2, 2, 2).unwrap();
    assert_eq!(mem.occupancy_report().total(), 0);
    mem.insert(0, &[1.0, 0.0], 0.2).unwrap();
    mem.insert(3, &[0.0, 1.0], 0.4).unwrap();
    mem.insert(3, &[1.0, 0.0], 0.1).unwrap();
    let r = mem.occupancy_report();
    assert_eq!((r.id_total, r.neg_total), (1, 2));
    assert_eq!(r.per_class[3].count, 2);
    let e = r.per_class[3].entropy.unwrap();
    assert_eq!((e.min, e.max), (0.1, 0.4));
    assert!((e.mean - 0.25).abs() < 1e-15);
    assert!(r.per_class[1].entropy.is_none());
}

#[test]
fn fuzzed_stream_never_overfills() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mem = TaskAwareMemory::new(3, 4, 3, 4).unwrap();
    for _ in 0..5000 {
        let y = rng.random_range(0..7);
        mem.insert(y, &unit(&mut rng, 4), rng.random_range(0.0..0.7)).unwrap();
        assert!((0..7).all(|c| mem.occupancy(c) <= 3));
    }
    assert_eq!(mem.total_occupancy(), 21);
}

#[test]
fn snapshot_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let t = text(&mut rng, 2, 3, 6);
    let mut mem = TaskAwareMemory::for_proxies(&t, 2).unwrap();
    for i in 0..7 {
        mem.insert(i % 5, &unit(&mut rng, 6), 0.1 * i as f64).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    dump_snapshot(&mem, dir.path()).unwrap();
    let back = load_snapshot(dir.path()).unwrap();
    assert_eq!(back.occupancy_report(), mem.occupancy_report());
    for y in 0..5 {
        for ((a, _), (b, _)) in back.entries(y).zip(mem.entries(y)) {
            for (x, z) in a.iter().zip(b) {
                assert!((x - z).abs() < 1e-6);
            }
        }
    }
    // warm start continues eviction where the dump left off
    let mut a = mem.clone();
    let mut b = back;
    let v = unit(&mut rng, 6);
    assert_eq!(a.insert(0, &v, 0.05).unwrap(), b.insert(0, &v, 0.05).unwrap());
}

fn random_state(seed: u64) -> (ProxyMatrix, TaskAwareMemory, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, m, d, l) = (
        rng.random_range(1..4),
        rng.random_range(1..5),
        rng.random_range(2..9),
        rng.random_range(1..5),
    );
    let t = text(&mut rng, c, m, d);
    let mut mem = TaskAwareMemory::for_proxies(&t, l).unwrap();
    for _ in 0..rng.random_range(0..3 * (c + m) * l) {
        let y = rng.random_range(0..c + m);
        mem.insert(y, &unit(&mut rng, d), rng.random_range(0.0..0.7)).unwrap();
    }
    let v = unit(&mut rng, d);
    (t, mem, v)
}

proptest! {
    #[test]
    fn zero_slots_are_neutral(seed in any::<u64>(), beta in 0.5f64..20.0) {
        let (t, mem, v) = random_state(seed);
        let ta = mem.task_adaptive_proxies(&t).unwrap();
        for (y, want) in ta_oracle(&mem, &t).iter().enumerate() {
            for (a, b) in ta.row(y).iter().zip(want) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
        let sa = mem.sample_adaptive_proxies(&t, &v, beta).unwrap();
        for (y, want) in sa_oracle(&mem, &t, &v, beta).iter().enumerate() {
            for (a, b) in sa.row(y).iter().zip(want) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
        for row in ta.rows().chain(sa.rows()) {
            let n: f64 = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn empty_memory_scores_equal_neglabel(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = text(&mut rng, 3, 5, 8);
        let mem = TaskAwareMemory::for_proxies(&t, 4).unwrap();
        let v = unit(&mut rng, 8);
        let nl = neglabel_score(&v, &t, 0.01).unwrap();
        let ta = proxy_score(&v, &mem.task_adaptive_proxies(&t).unwrap(), 0.01).unwrap();
        let sa = proxy_score(&v, &mem.sample_adaptive_proxies(&t, &v, 5.5).unwrap(), 0.01).unwrap();
        prop_assert!((ta - nl).abs() < 1e-9);
        prop_assert!((sa - nl).abs() < 1e-9);
    }

    #[test]
    fn sample_adaptive_is_rotation_equivariant(seed in any::<u64>(), i in 0usize..8, j in 0usize..8, angle in 0.1f64..3.0) {
        prop_assume!(i != j);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 8;
        let t = text(&mut rng, 2, 3, d);
        let rotate = |v: &[f64]| {
            let mut r = v.to_vec();
            let (c, s) = (angle.cos(), angle.sin());
            r[i] = c * v[i] - s * v[j];
            r[j] = s * v[i] + c * v[j];
            r
        };
        let mut mem = TaskAwareMemory::for_proxies(&t, 3).unwrap();
        let mut rot_mem = TaskAwareMemory::for_proxies(&t, 3).unwrap();
        for _ in 0..10 {
            let y = rng.random_range(0..5);
            let u = unit(&mut rng, d);
            mem.insert(y, &u, 0.2).unwrap();
            rot_mem.insert(y, &rotate(&u), 0.2).unwrap();
        }
        let rot_rows: Vec<Vec<f64>> = t.rows().map(|r| rotate(r)).collect();
        let rot_t = ProxyMatrix::from_raw(&rot_rows[..2], &rot_rows[2..]).unwrap();
        let v = unit(&mut rng, d);
        let sa = mem.sample_adaptive_proxies(&t, &v, 5.5).unwrap();
        let rot_sa = rot_mem.sample_adaptive_proxies(&rot_t, &rotate(&v), 5.5).unwrap();
        for (a, b) in sa.rows().zip(rot_sa.rows()) {
            for (x, y) in rotate(a).iter().zip(b) {
                prop_assert!((x - y).abs() < 1e-6);
            }
        }
    }
}
