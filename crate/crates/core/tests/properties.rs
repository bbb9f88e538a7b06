mod common;

use std::collections::HashMap;

use behalign::agreement::{bootstrap_ci, cohens_kappa, DEFAULT_QUANTILES};
use behalign::behavior::{
    behavior_alignment, conditional_entropy, fit_markov, weighted_behavior_alignment, NormalizationMode,
};
use behalign::corpus::{build_eval_instances, labeled_sentences, BehaviorLabel, Dialogue, ResponseRecord};
use behalign::pairs::{
    build_training_sets, fold_indices, mine_hard_negative_classes, ConfusionMatrix, HardPair, PairSizes,
};
use proptest::prelude::*;

fn relabel(corpus: &(Vec<Dialogue>, Vec<ResponseRecord>), perm: &[usize]) -> (Vec<Dialogue>, Vec<ResponseRecord>) {
    let map = |l: BehaviorLabel| BehaviorLabel::ALL[perm[l.index()]];
    let mut out = corpus.clone();
    for d in &mut out.0 {
        for t in &mut d.turns {
            t.behavior = t.behavior.map(map);
        }
    }
    for r in &mut out.1 {
        r.behavior = r.behavior.map(map);
    }
    out
}

fn permutation() -> impl Strategy<Value = Vec<usize>> {
    Just((0..BehaviorLabel::COUNT).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ba_matches_recount(seed in any::<u64>(), n in 1usize..40) {
        let (dialogues, responses) = common::random_corpus(n, seed);
        let instances = build_eval_instances(&dialogues, &responses).unwrap();
        let sys: HashMap<(&str, usize), BehaviorLabel> = responses
            .iter()
            .map(|r| ((r.dialogue_id.as_str(), r.turn_index), r.behavior.unwrap()))
            .collect();
        let (mut hits, mut total) = (0usize, 0usize);
        for d in &dialogues {
            for (i, t) in d.turns.iter().enumerate().skip(1) {
                if let Some(&s) = sys.get(&(d.dialogue_id.as_str(), i + 1)) {
                    total += 1;
                    hits += usize::from(t.behavior == Some(s));
                }
            }
        }
        match behavior_alignment(&instances, common::SYSTEM, NormalizationMode::ScoredTurns) {
            Ok(r) => prop_assert_eq!(r.aggregate, hits as f64 / total as f64),
            Err(_) => prop_assert_eq!(total, 0),
        }
    }

    #[test]
    fn ba_invariant_under_label_permutation(seed in any::<u64>(), perm in permutation()) {
        let corpus = common::random_corpus(20, seed);
        let permuted = relabel(&corpus, &perm);
        let a = build_eval_instances(&corpus.0, &corpus.1).unwrap();
        let b = build_eval_instances(&permuted.0, &permuted.1).unwrap();
        for mode in [NormalizationMode::ScoredTurns, NormalizationMode::PaperLiteral] {
            let (ra, rb) = (
                behavior_alignment(&a, common::SYSTEM, mode),
                behavior_alignment(&b, common::SYSTEM, mode),
            );
            prop_assert_eq!(ra.ok().map(|r| r.aggregate), rb.ok().map(|r| r.aggregate));
        }
    }

    #[test]
    fn literal_never_exceeds_scored(seed in any::<u64>()) {
        let (d, r) = common::random_corpus(6, seed);
        let inst = build_eval_instances(&d, &r).unwrap();
        if let (Ok(s), Ok(l)) = (
            behavior_alignment(&inst, common::SYSTEM, NormalizationMode::ScoredTurns),
            behavior_alignment(&inst, common::SYSTEM, NormalizationMode::PaperLiteral),
        ) {
            prop_assert!(l.aggregate <= s.aggregate);
            prop_assert!((0.0..=1.0).contains(&l.aggregate));
        }
    }

    #[test]
    fn weighted_ba_is_bounded_mean(seed in any::<u64>(), order in 1usize..4, h_min in 0.05f64..1.0) {
        let (d, r) = common::random_corpus(30, seed);
        let inst = build_eval_instances(&d, &r).unwrap();
        let model = fit_markov(&d, order, 0.0).unwrap();
        if let Ok(rep) = weighted_behavior_alignment(&inst, common::SYSTEM, &model, h_min) {
            prop_assert!((0.0..=1.0).contains(&rep.aggregate));
            for s in &rep.per_instance {
                prop_assert!(s.weight > 0.0 && s.weight <= 1.0 / h_min + 1e-12);
            }
        }
    }

    #[test]
    fn entropy_within_log_bound(seed in any::<u64>(), alpha in 0.0f64..2.0) {
        let (d, _) = common::random_corpus(30, seed);
        let model = fit_markov(&d, 2, alpha).unwrap();
        let hs: Vec<Vec<BehaviorLabel>> = model.histories().map(<[BehaviorLabel]>::to_vec).collect();
        for h in hs {
            let e = conditional_entropy(&model, &h).unwrap();
            prop_assert!(e >= 0.0 && e <= (BehaviorLabel::COUNT as f64).log2() + 1e-9);
        }
    }

    #[test]
    fn kappa_symmetric_and_bounded(x in prop::collection::vec(0u8..3, 2..40), seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let y: Vec<u8> = x.iter().map(|&v| if rand::Rng::gen_bool(&mut rng, 0.7) { v } else { rand::Rng::gen_range(&mut rng, 0..3) }).collect();
        let a = cohens_kappa(&x, &y).unwrap();
        let b = cohens_kappa(&y, &x).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!(a <= 1.0 + 1e-12);
    }

    #[test]
    fn bootstrap_is_seed_deterministic(xs in prop::collection::vec(-10.0f64..10.0, 1..30), seed in any::<u64>()) {
        let mean = |s: &[&f64]| Some(s.iter().copied().sum::<f64>() / s.len() as f64);
        let a = bootstrap_ci(&xs, mean, 200, seed, DEFAULT_QUANTILES).unwrap();
        let b = bootstrap_ci(&xs, mean, 200, seed, DEFAULT_QUANTILES).unwrap();
        prop_assert_eq!(a.0.to_bits(), b.0.to_bits());
        prop_assert_eq!(a.1.to_bits(), b.1.to_bits());
        prop_assert!(a.0 <= a.1);
    }

    #[test]
    fn folds_partition(n in 2usize..300, k in 2usize..10, seed in any::<u64>()) {
        prop_assume!(n >= k);
        let folds = fold_indices(n, k, seed).unwrap();
        let mut seen = vec![0u8; n];
        for f in &folds {
            for &i in f {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn training_sets_reproducible(seed in any::<u64>(), n_hard in 0usize..20) {
        let (d, _) = common::random_corpus(40, 9);
        let sentences = labeled_sentences(&d);
        let hard = [HardPair { class: BehaviorLabel::Similarity, partner: BehaviorLabel::OfferHelp }];
        let sizes = PairSizes { n_pos: 100, n_neg: 100, n_hard };
        let a = build_training_sets(&sentences, sizes, &hard, seed).unwrap();
        let b = build_training_sets(&sentences, sizes, &hard, seed).unwrap();
        prop_assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
    }

    #[test]
    fn mining_is_a_function_of_its_inputs(cells in prop::collection::vec(0u64..20, 169)) {
        let mut cm = ConfusionMatrix::default();
        for (i, c) in cells.iter().enumerate() {
            cm.counts[i / 13][i % 13] = *c;
        }
        let acc = cm.per_class_accuracy();
        let a = mine_hard_negative_classes(&acc, &cm, 0.7);
        prop_assert_eq!(&a, &mine_hard_negative_classes(&acc, &cm, 0.7));
        for h in &a {
            prop_assert!(acc[&h.class] < 0.7);
            prop_assert_ne!(h.class, h.partner);
            let row = &cm.counts[h.class.index()];
            let best = (0..13).filter(|&j| j != h.class.index()).map(|j| row[j]).max().unwrap();
            prop_assert_eq!(row[h.partner.index()], best);
        }
    }
}
