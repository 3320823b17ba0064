mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sedae::nn::normal_init;
use sedae::tensor::Tensor;
use sedae::wmd::{signature, transport_simplex, wmd, NBowSignature, WordEmbeddings};

fn random_sig(rng: &mut ChaCha8Rng, vocab: usize, max_support: usize) -> NBowSignature<f64> {
    let k = rng.gen_range(1..=max_support);
    let mut words: Vec<usize> = Vec::new();
    while words.len() < k {
        let w = rng.gen_range(4..vocab);
        if !words.contains(&w) {
            words.push(w);
        }
    }
    words.sort();
    NBowSignature::from_pairs(
        words
            .into_iter()
            .map(|w| (w, rng.gen_range(0.05..1.0)))
            .collect(),
    )
    .unwrap()
}

#[test]
fn simplex_matches_dense_lp_on_random_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..300 {
        let m = rng.gen_range(1..=6);
        let n = rng.gen_range(1..=6);
        let norm = |v: Vec<f64>| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect::<Vec<_>>()
        };
        let a = norm((0..m).map(|_| rng.gen_range(0.01..1.0)).collect());
        let b = norm((0..n).map(|_| rng.gen_range(0.01..1.0)).collect());
        let cost: Vec<f64> = (0..m * n).map(|_| rng.gen_range(0.0..2.0)).collect();
        let plan =
            transport_simplex(&a, &b, &Tensor::from_vec(&[m, n], cost.clone()).unwrap()).unwrap();
        let oracle = common::lp_transport(&a, &b, &cost);
        assert!(
            (plan.objective - oracle).abs() <= 1e-9,
            "{} vs {}",
            plan.objective,
            oracle
        );
    }
}

#[test]
fn degenerate_equal_masses_are_solved() {
    // uniform masses make north-west corner ties on every step
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 1..=6 {
        let a = vec![1.0 / n as f64; n];
        let cost: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let plan =
            transport_simplex(&a, &a, &Tensor::from_vec(&[n, n], cost.clone()).unwrap()).unwrap();
        let oracle = common::lp_transport(&a, &a, &cost);
        assert!((plan.objective - oracle).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wmd_is_a_metric_on_signatures(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = WordEmbeddings::normalized(&normal_init(&mut rng, &[16, 5], 1.0));
        let a = random_sig(&mut rng, 16, 6);
        let b = random_sig(&mut rng, 16, 6);
        let c = random_sig(&mut rng, 16, 6);
        let ab = wmd(&a, &b, &e).unwrap();
        let ba = wmd(&b, &a, &e).unwrap();
        let bc = wmd(&b, &c, &e).unwrap();
        let ac = wmd(&a, &c, &e).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-8);
        prop_assert!(ac <= ab + bc + 1e-6);
        prop_assert!(wmd(&a, &a, &e).unwrap().abs() <= 1e-8);
        if a != b {
            prop_assert!(ab > 1e-8);
        }
    }

    #[test]
    fn sentence_order_is_ignored(ids in proptest::collection::vec(4usize..20, 1..12)) {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = WordEmbeddings::<f64>::normalized(&normal_init(&mut rng, &[20, 4], 1.0));
        let mut rev = ids.clone();
        rev.reverse();
        prop_assert_eq!(signature(&ids, &e).unwrap(), signature(&rev, &e).unwrap());
    }
}
