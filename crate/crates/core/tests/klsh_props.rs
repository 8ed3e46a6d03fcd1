mod common;

use common::*;
use nskernel::corpus::Structure;
use nskernel::kernels::{KernelConfig, KernelEngine};
use nskernel::klsh::*;
use nskernel::stats::spearman;
use nskernel::synth::{generate, SyntheticSpec};
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::Rng;

fn normalized() -> KernelEngine {
    KernelEngine::baseline(KernelConfig {
        normalize: true,
        ..KernelConfig::default()
    })
    .unwrap()
}

fn corpus(n: usize, seed: u64) -> Vec<Structure> {
    let spec = SyntheticSpec {
        n_examples: n,
        seed,
        ..SyntheticSpec::default()
    };
    generate(&spec)
        .unwrap()
        .examples()
        .iter()
        .map(|e| e.structure.clone())
        .collect()
}

#[test]
fn rknn_functions_never_touch_the_kernel() {
    let e = normalized();
    let items = corpus(200, 1);
    let refs: Vec<&Structure> = items.iter().collect();
    let functions = build_rknn_functions(20, 8, 5, 3).unwrap();
    let anchors = sample_anchors(refs.len(), 20, 3).unwrap();
    e.reset_evaluations();
    let index = build_index(&e, &refs, anchors, functions).unwrap();
    // hashing costs exactly one kernel per item and anchor
    assert_eq!(e.evaluations(), (refs.len() * 20 + 20 + refs.len()) as u64);
    assert_eq!(index.len(), refs.len());
}

#[test]
fn duplicates_share_buckets_and_buckets_partition() {
    let e = normalized();
    let mut items = corpus(150, 2);
    items.extend(items[..30].to_vec());
    let refs: Vec<&Structure> = items.iter().collect();
    for family in [HashFamily::Rknn, HashFamily::Kg] {
        let params = IndexParams {
            family,
            bits: Some(8),
            seed: 5,
            ..IndexParams::default()
        };
        let index = HashIndex::build(&e, &refs, &params).unwrap();
        for i in 0..30 {
            assert_eq!(index.code(i), index.code(150 + i));
        }
        let mut seen: Vec<usize> = index.buckets().values().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..refs.len()).collect::<Vec<_>>());
        for (code, members) in index.buckets() {
            assert!(members.windows(2).all(|w| w[0] < w[1]));
            assert!(members.iter().all(|&i| index.code(i) == *code));
        }
        assert_eq!(index, HashIndex::build(&e, &refs, &params).unwrap());
    }
}

/// Per-pair Spearman correlation between the similarity bin (ten equal
/// bins over [0, 1]) and the fraction of agreeing code bits.
fn collision_correlation(family: HashFamily, seed: u64) -> f64 {
    let e = normalized();
    let items = corpus(600, seed);
    let refs: Vec<&Structure> = items.iter().collect();
    let params = IndexParams {
        family,
        bits: Some(10),
        seed,
        ..IndexParams::default()
    };
    let index = HashIndex::build(&e, &refs, &params).unwrap();
    let mut r = rng(seed);
    let mut bins = Vec::new();
    let mut agree = Vec::new();
    for _ in 0..2000 {
        let i = r.gen_range(0..refs.len());
        let j = r.gen_range(0..refs.len());
        let sim = e.structure_kernel(refs[i], refs[j]);
        bins.push((sim * 10.0).floor().min(9.0));
        agree.push(1.0 - f64::from(index.code(i).hamming(&index.code(j))) / 10.0);
    }
    spearman(&bins, &agree)
}

#[test]
fn collisions_grow_with_similarity() {
    for family in [HashFamily::Rknn, HashFamily::Kg] {
        let rho = collision_correlation(family, 7);
        assert!(rho > 0.0, "{family}: {rho}");
    }
}

#[test]
fn probed_candidates_beat_random_ones() {
    let e = normalized();
    let items = corpus(800, 8);
    let refs: Vec<&Structure> = items.iter().collect();
    let index = HashIndex::build(
        &e,
        &refs,
        &IndexParams {
            bits: Some(7),
            seed: 8,
            ..IndexParams::default()
        },
    )
    .unwrap();
    let mut r = rng(8);
    let queries = 100;
    let mut wins = 0;
    for q in 0..queries {
        let cands: Vec<usize> = index
            .probe(index.code(q), 16, 2)
            .into_iter()
            .filter(|&j| j != q)
            .collect();
        let budget = cands.len().min(16);
        if budget == 0 {
            continue;
        }
        let mean = |set: &[usize]| {
            set.iter()
                .map(|&j| e.structure_kernel(refs[q], refs[j]))
                .sum::<f64>()
                / set.len() as f64
        };
        let random: Vec<usize> = sample(&mut r, refs.len() - 1, budget)
            .into_iter()
            .map(|j| if j >= q { j + 1 } else { j })
            .collect();
        if mean(&cands[..budget]) > mean(&random) {
            wins += 1;
        }
    }
    assert!(wins * 100 >= 95 * queries, "{wins} of {queries}");
}

proptest! {
    #[test]
    fn hashing_is_pure(ks in proptest::collection::vec(0.0..1.0f64, 12), seed in any::<u64>()) {
        let f = build_rknn_functions(12, 9, 3, seed).unwrap();
        prop_assert_eq!(f.hash(&ks), f.hash(&ks));
        prop_assert_eq!(f.hash(&ks).len(), 9);
    }

    #[test]
    fn anchors_are_distinct(n in 2..300usize, frac in 0.0..1.0f64, seed in any::<u64>()) {
        let m = (2 + ((n - 2) as f64 * frac) as usize).min(n);
        let a = sample_anchors(n, m, seed).unwrap();
        let mut v = a.indices().to_vec();
        v.sort_unstable();
        v.dedup();
        prop_assert_eq!(v.len(), m);
        prop_assert!(v.iter().all(|&i| i < n));
    }
}
