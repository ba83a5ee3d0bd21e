use std::collections::HashSet;

use musemia::attack::{
    epsilon_from_heuristic, mc_score, rank_and_label, DistanceMetric, EpsilonHeuristic, McConfig, ScoredCandidate,
    Stash,
};
use musemia::metrics::{compute_metrics, ConfusionCounts};
use musemia::nn::{Activation, AdamConfig, AdamState, Mlp};
use musemia::pianoroll::{decode_dataset, encode_dataset, split, Dataset, Pianoroll, PianorollShape, SplitSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn shape_strategy() -> impl Strategy<Value = PianorollShape> {
    (1usize..4, 1usize..3, 1usize..6, 1usize..30)
        .prop_map(|(t, b, s, p)| PianorollShape::new(t, b, s, p).unwrap())
}

fn roll_strategy(shape: PianorollShape) -> impl Strategy<Value = Pianoroll> {
    prop::collection::vec(any::<bool>(), shape.cells()).prop_map(move |bits| {
        let flat: Vec<f64> = bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Pianoroll::from_flat(shape, &flat).unwrap()
    })
}

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    shape_strategy()
        .prop_flat_map(|shape| (Just(shape), prop::collection::vec(roll_strategy(shape), 1..12)))
        .prop_map(|(shape, rolls)| Dataset::from_rolls(shape, rolls).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dataset_bytes_round_trip(data in dataset_strategy()) {
        let bytes = encode_dataset(&data);
        let back = decode_dataset(&bytes).unwrap();
        prop_assert_eq!(back.rolls(), data.rolls());
        prop_assert_eq!(back.shape(), data.shape());
        prop_assert_eq!(encode_dataset(&back), bytes);
    }

    #[test]
    fn flatten_is_a_bijection(roll in shape_strategy().prop_flat_map(roll_strategy)) {
        let flat = roll.to_flat();
        prop_assert_eq!(flat.len(), roll.shape().cells());
        prop_assert_eq!(flat.iter().filter(|&&v| v == 1.0).count(), roll.active_cells());
        prop_assert_eq!(Pianoroll::from_flat(*roll.shape(), &flat).unwrap(), roll);
    }

    #[test]
    fn profile_counts_active_pitches(roll in shape_strategy().prop_flat_map(roll_strategy)) {
        let s = *roll.shape();
        let mut total = 0.0;
        for t in 0..s.tracks {
            for b in 0..s.bars {
                for st in 0..s.steps_per_bar {
                    let profile = roll.pitch_class_profile(t, b, st).unwrap();
                    let active = (0..s.pitches).filter(|&p| roll.get(t, b, st, p).unwrap()).count();
                    prop_assert_eq!(profile.iter().sum::<f64>(), active as f64);
                    total += active as f64;
                }
            }
        }
        prop_assert_eq!(total, roll.active_cells() as f64);
    }

    #[test]
    fn split_partitions_ids(n in 2usize..300, fraction in 0.01f64..0.99, seed in any::<u64>()) {
        let shape = PianorollShape::new(1, 1, 1, 1).unwrap();
        let data = Dataset::from_rolls(shape, vec![Pianoroll::zeros(shape); n]).unwrap();
        let spec = SplitSpec { train_fraction: fraction, seed };
        let expected = (fraction * n as f64).floor() as usize;
        match split(&data, &spec) {
            Ok((train, test)) => {
                prop_assert_eq!(train.len(), expected);
                prop_assert_eq!(train.len() + test.len(), n);
                let a: HashSet<u64> = train.ids().iter().copied().collect();
                let b: HashSet<u64> = test.ids().iter().copied().collect();
                prop_assert!(a.is_disjoint(&b));
                prop_assert_eq!(a.union(&b).count(), n);
                let again = split(&data, &spec).unwrap();
                prop_assert_eq!(again.0.ids(), train.ids());
            }
            Err(_) => prop_assert!(expected == 0 || expected == n),
        }
    }

    #[test]
    fn metric_axioms(tp in 0u64..1000, fp in 0u64..1000, tn in 0u64..1000, fn_ in 0u64..1000) {
        prop_assume!(tp + fp + tn + fn_ > 0);
        let r = compute_metrics(&ConfusionCounts::new(tp, fp, tn, fn_), 1).unwrap();
        for v in [r.success_rate, r.accuracy, r.precision, r.recall, r.fpr, r.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert_eq!(r.success_rate, r.recall);
        let lo = r.precision.min(r.recall);
        let hi = r.precision.max(r.recall);
        prop_assert!(r.f1 >= lo - 1e-12 && r.f1 <= hi + 1e-12);
        prop_assert_eq!(r.degenerate, tp + fn_ == 0 || tp + fp == 0 || fp + tn == 0 || tp == 0);
    }

    #[test]
    fn equal_counts_collapse_columns(members in 1u64..10_000, extra in 0u64..10_000, tp_frac in 0.0f64..=1.0) {
        let tp = (tp_frac * members as f64).floor() as u64;
        let wrong = members - tp;
        let r = compute_metrics(&ConfusionCounts::new(tp, wrong, members + extra - wrong, wrong), 0).unwrap();
        prop_assert!((r.precision - r.success_rate).abs() <= 1e-12);
        prop_assert!((r.f1 - r.success_rate).abs() <= 1e-12);
    }

    #[test]
    fn whitebox_is_rank_based(
        scores in prop::collection::vec(-100.0f64..100.0, 2..60),
        members in 1usize..60,
        perm_seed in any::<u64>(),
    ) {
        let members = members.min(scores.len() - 1).max(1);
        let cands: Vec<ScoredCandidate> = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| ScoredCandidate { id: i as u64, score: s, is_member: i < members })
            .collect();
        let base = rank_and_label(&cands, members).unwrap();
        let c = base.confusion;
        prop_assert_eq!(c.tp + c.fp, members as u64);
        prop_assert_eq!(c.tp + c.fn_, members as u64);

        // Input order does not matter.
        let mut shuffled = cands.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
        prop_assert_eq!(rank_and_label(&shuffled, members).unwrap().predicted_members, base.predicted_members.clone());

        // Neither does a strictly increasing transform of the scores.
        let warped: Vec<ScoredCandidate> = cands
            .iter()
            .map(|c| ScoredCandidate { score: (c.score / 50.0).exp() * 3.0 + 1.0, ..*c })
            .collect();
        prop_assert_eq!(rank_and_label(&warped, members).unwrap().predicted_members, base.predicted_members);
    }

    #[test]
    fn percentile_is_a_pool_member(
        pool in prop::collection::vec(0.0f64..50.0, 1..400),
        q in 0.0001f64..0.9999,
    ) {
        let e = epsilon_from_heuristic(&pool, EpsilonHeuristic::Percentile(q)).unwrap();
        prop_assert!(pool.contains(&e));
        let below = pool.iter().filter(|&&d| d < e).count();
        let at_most = pool.iter().filter(|&&d| d <= e).count();
        let rank = EpsilonHeuristic::Percentile(q).rank(pool.len());
        prop_assert!(below < rank && rank <= at_most);
        let m = epsilon_from_heuristic(&pool, EpsilonHeuristic::Median).unwrap();
        prop_assert!(pool.contains(&m));
    }

    #[test]
    fn mc_score_grid_and_monotone(
        bits in prop::collection::vec(prop::collection::vec(any::<bool>(), 12), 2..25),
        eps in (0.0f64..4.0, 0.0f64..4.0),
        seed in any::<u64>(),
        tonal in any::<bool>(),
    ) {
        let shape = PianorollShape::new(1, 1, 1, 12).unwrap();
        let rolls: Vec<Pianoroll> = bits
            .iter()
            .map(|b| Pianoroll::from_flat(shape, &b.iter().map(|&x| x as u8 as f64).collect::<Vec<_>>()).unwrap())
            .collect();
        let (candidate, rest) = rolls.split_first().unwrap();
        let stash = Stash::new(rest.to_vec(), "prop", 0).unwrap();
        let n = (seed as usize % stash.len()) + 1;
        let config = McConfig {
            stash_size: stash.len(),
            n_per_query: n,
            heuristic: EpsilonHeuristic::Median,
            metric: if tonal { DistanceMetric::TonalCentroid } else { DistanceMetric::EuclideanRaw },
            subset_size: 1,
            trials: 1,
            seed: 0,
        };
        let (lo, hi) = if eps.0 <= eps.1 { eps } else { (eps.1, eps.0) };
        let a = mc_score(candidate, &stash, &config, lo, seed).unwrap();
        let b = mc_score(candidate, &stash, &config, hi, seed).unwrap();
        prop_assert!(a <= b);
        for s in [a, b] {
            let k = s * n as f64;
            prop_assert!((k - k.round()).abs() < 1e-9 && (0.0..=1.0).contains(&s));
        }
    }
}

fn objective(mlp: &Mlp, x: &[f64]) -> f64 {
    mlp.predict(x).unwrap().iter().enumerate().map(|(i, y)| (i as f64 + 1.0) * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn backprop_matches_finite_differences(
        dims in prop::collection::vec(1usize..5, 2..5),
        act_picks in prop::collection::vec(0usize..3, 4),
        seed in any::<u64>(),
    ) {
        // Smooth activations only; ReLU kinks are covered by the acceptance suite.
        let pool = [Activation::Linear, Activation::Tanh, Activation::Sigmoid];
        let acts: Vec<Activation> = (0..dims.len() - 1).map(|i| pool[act_picks[i]]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mlp = Mlp::glorot(&dims, &acts, &mut rng).unwrap();
        let x: Vec<f64> = (0..dims[0]).map(|i| (i as f64 * 0.37).sin()).collect();
        let dy: Vec<f64> = (0..*dims.last().unwrap()).map(|i| i as f64 + 1.0).collect();
        let (_, cache) = mlp.forward(&x).unwrap();
        let (grads, _) = mlp.backward(&cache, &dy).unwrap();
        let analytic = grads.slices().concat();
        let sizes: Vec<usize> = mlp.param_slices().iter().map(|s| s.len()).collect();
        let h = 1e-6;
        let mut k = 0;
        for (t, &len) in sizes.iter().enumerate() {
            for i in 0..len {
                let orig = mlp.param_slices()[t][i];
                mlp.param_slices_mut()[t][i] = orig + h;
                let up = objective(&mlp, &x);
                mlp.param_slices_mut()[t][i] = orig - h;
                let down = objective(&mlp, &x);
                mlp.param_slices_mut()[t][i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let rel = (analytic[k] - numeric).abs() / analytic[k].abs().max(numeric.abs()).max(1e-6);
                prop_assert!(rel < 1e-4, "param {k}: analytic {} numeric {numeric}", analytic[k]);
                k += 1;
            }
        }
    }

    #[test]
    fn first_adam_step_moves_by_lr(grads in prop::collection::vec(-10.0f64..10.0, 1..20), lr in 1e-4f64..1e-1) {
        prop_assume!(grads.iter().all(|g| g.abs() > 1e-3));
        let mut params = vec![0.0; grads.len()];
        let mut adam = AdamState::new(AdamConfig::with_lr(lr), &[grads.len()]);
        adam.step(&mut [&mut params], &[&grads]).unwrap();
        for (p, g) in params.iter().zip(&grads) {
            // m̂ = g and v̂ = g², so the step is lr·g/(|g|+ε).
            let expected = -lr * g / (g.abs() + 1e-8);
            prop_assert!((p - expected).abs() <= 1e-12);
        }
    }
}
