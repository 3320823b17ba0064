use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sedae::classifier::{CnnConfig, CnnInput, TextCnn};
use sedae::corpus::{Style, TokenSeq};
use sedae::model::{ModelConfig, Seq2Seq, SrcBatch};
use sedae::nn::{normal_init, LstmCell, Params};
use sedae::optim::AdamState;
use sedae::refine::{emit_pairs, CandidateSet};
use sedae::tensor::Tensor;
use sedae::wmd::{wmd_plan, NBowSignature, WordEmbeddings};

fn random_model(seed: u64) -> Seq2Seq<f64> {
    Seq2Seq::new(
        &mut ChaCha8Rng::seed_from_u64(seed),
        &ModelConfig {
            vocab: 14,
            emb_dim: 4,
            enc_hidden: 3,
            dec_hidden: 5,
            layers: 2,
        },
    )
    .unwrap()
}

fn signature(rng: &mut ChaCha8Rng, vocab: usize) -> NBowSignature<f64> {
    let mut words: Vec<usize> = (0..vocab).filter(|_| rng.gen_bool(0.3)).collect();
    if words.is_empty() {
        words.push(rng.gen_range(0..vocab));
    }
    NBowSignature::from_pairs(words.into_iter().map(|w| (w, rng.gen_range(0.05..1.0))).collect())
        .unwrap()
}

fn token(id: usize, style: Style) -> TokenSeq {
    TokenSeq {
        tokens: vec![format!("w{id}")],
        ids: vec![id],
        style,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_rows_are_distributions(
        rows in 1usize..6,
        cols in 1usize..9,
        scale in 0.1f64..300.0,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = normal_init::<f64, _>(&mut rng, &[rows, cols], scale).softmax_rows();
        for r in 0..rows {
            prop_assert!(p.row(r).iter().all(|&v| v >= 0.0));
            prop_assert!((p.row(r).iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn adam_with_zero_gradients_is_the_identity(seed in any::<u64>(), steps in 1usize..5) {
        let model = random_model(seed);
        let mut params = model.clone();
        let mut adam = AdamState::new(1e-2);
        for _ in 0..steps {
            adam.update(&mut params, &model.zeros_like()).unwrap();
        }
        prop_assert_eq!(params, model);
    }

    #[test]
    fn forward_passes_are_bit_identical(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cell = LstmCell::<f64>::new(&mut rng, 3, 4);
        let x = normal_init(&mut rng, &[2, 3], 1.0);
        let h = normal_init(&mut rng, &[2, 4], 1.0);
        let c = normal_init(&mut rng, &[2, 4], 1.0);
        let a = cell.forward(&x, &h, &c).unwrap();
        let b = cell.forward(&x, &h, &c).unwrap();
        prop_assert_eq!((a.0, a.1), (b.0, b.1));

        let m = random_model(seed);
        let src: Vec<Vec<usize>> = (0..3)
            .map(|_| (0..rng.gen_range(1..6)).map(|_| rng.gen_range(4..14)).collect())
            .collect();
        let refs: Vec<&[usize]> = src.iter().map(Vec::as_slice).collect();
        let batch = SrcBatch::new(&refs).unwrap();
        prop_assert_eq!(m.encode(&batch).unwrap().z, m.encode(&batch).unwrap().z);
        let styles = [Style::X, Style::Y, Style::X];
        prop_assert_eq!(m.greedy(&batch, &styles).unwrap(), m.greedy(&batch, &styles).unwrap());
    }

    #[test]
    fn hard_ids_equal_one_hot_mixtures(ids in proptest::collection::vec(4usize..10, 1..8), seed in any::<u64>()) {
        let net = TextCnn::<f64>::new(
            &mut ChaCha8Rng::seed_from_u64(seed),
            10,
            &CnnConfig { emb_dim: 4, widths: vec![2, 3], filters: 3, dropout: 0.5 },
        )
        .unwrap();
        let mut one_hot = Tensor::zeros(&[ids.len(), 10]);
        for (r, &id) in ids.iter().enumerate() {
            one_hot.set(r, id, 1.0);
        }
        let hard = net.forward(CnnInput::Hard(&ids)).unwrap();
        let soft = net.forward(CnnInput::Soft(&one_hot)).unwrap();
        prop_assert!((hard[0] - soft[0]).abs() <= 1e-12);
        prop_assert!((hard[0] + hard[1] - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn transport_plans_are_feasible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let emb = WordEmbeddings::normalized(&normal_init(&mut rng, &[20, 4], 1.0));
        let a = signature(&mut rng, 20);
        let b = signature(&mut rng, 20);
        let plan = wmd_plan(&a, &b, &emb).unwrap();
        prop_assert!(plan.flow.data().iter().all(|&f| f >= -1e-12));
        for i in 0..a.len() {
            prop_assert!((plan.flow.row(i).iter().sum::<f64>() - a.mass[i]).abs() <= 1e-8);
        }
        for j in 0..b.len() {
            let col: f64 = (0..a.len()).map(|i| plan.flow.get(i, j)).sum();
            prop_assert!((col - b.mass[j]).abs() <= 1e-8);
        }
    }

    #[test]
    fn streaming_best_is_the_first_maximum(
        scores in proptest::collection::vec(prop_oneof![Just(f64::NEG_INFINITY), (0u8..6).prop_map(f64::from)], 1..30),
    ) {
        let mut set = CandidateSet::new(0, Style::X);
        let mut before = f64::NEG_INFINITY;
        for (k, &cs) in scores.iter().enumerate() {
            set.offer(token(k, Style::Y), cs, k + 1, false);
            prop_assert!(set.best_cs >= before);
            before = set.best_cs;
        }
        let offline = scores
            .iter()
            .enumerate()
            .filter(|(_, cs)| cs.is_finite())
            .fold(None::<(usize, f64)>, |best, (k, &cs)| match best {
                Some((_, b)) if cs <= b => best,
                _ => Some((k, cs)),
            });
        match offline {
            Some((k, cs)) => {
                prop_assert_eq!(set.best.as_ref().map(|b| b.ids[0]), Some(k));
                prop_assert_eq!(set.best_cs, cs);
                prop_assert_eq!(set.best_epoch, k + 1);
            }
            None => prop_assert!(set.best.is_none()),
        }
    }

    #[test]
    fn pair_targets_are_always_originals(n in 1usize..12, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let originals: [Vec<TokenSeq>; 2] = [
            (0..n).map(|i| token(100 + i, Style::X)).collect(),
            (0..n).map(|i| token(200 + i, Style::Y)).collect(),
        ];
        let mut sets = Vec::new();
        for s in Style::BOTH {
            for i in 0..n {
                let mut set = CandidateSet::new(i, s);
                for e in 1..4 {
                    set.offer(token(rng.gen_range(0..50), s.opposite()), rng.gen_range(0.0..1.0), e, false);
                }
                sets.push(set);
            }
        }
        let pairs = emit_pairs(&sets, [&originals[0], &originals[1]]);
        prop_assert_eq!(pairs.len(), 2 * n);
        for p in &pairs {
            prop_assert!(p.target.ids[0] >= 100);
            prop_assert!(p.source.ids[0] < 50);
            prop_assert_ne!(p.source.style, p.target.style);
        }
    }
}
