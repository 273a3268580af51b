mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rulelist::bounds::{build_b_vector, compute_m_max, compute_m_max_for_pool, upsilon};
use rulelist::posterior::log_posterior;
use rulelist::search::{mh_step, restart, BestTracker, ChainState, SearchConfig, SearchContext};
use rulelist::{AntecedentId, BitVector, CaptureEngine, CaptureState, Hyperparams, LabelCounts, PriorModel, RulePool};

use common::{all_lists, full_pool, random_labels, random_pool};

fn hp(lambda: f64) -> Hyperparams {
    Hyperparams {
        lambda,
        eta: 1.0,
        alpha0: 1.0,
        alpha1: 1.0,
    }
}

fn totals(labels: &BitVector) -> LabelCounts {
    let n1 = labels.count_ones();
    LabelCounts::new(labels.len() - n1, n1)
}

/// `log Υ` of every prefix of `ids`, from that list's own capture counts.
fn prefix_bounds(state: &CaptureState, pool: &RulePool, prior: &PriorModel, h: &Hyperparams) -> Vec<f64> {
    let counts = state.rule_counts();
    let cards: Vec<usize> = state.ids().iter().map(|&id| pool.cardinality(id)).collect();
    (0..=state.len())
        .map(|p| upsilon(&counts[..p], &cards[..p], totals(state.labels()), prior, h).unwrap())
        .collect()
}

#[test]
fn prefix_bound_dominates_every_visited_list() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut pairs = 0usize;
    for trial in 0..6 {
        let n = rng.random_range(50..400);
        let pool = random_pool(&mut rng, n, 8, 40, 3);
        let labels = random_labels(&mut rng, n);
        let h = hp(rng.random_range(1.0..8.0));
        let cfg = SearchConfig {
            chains: 4,
            iterations: 1500,
            seed: trial,
            deterministic: true,
            ..Default::default()
        };
        let ctx = SearchContext::new(&pool, &labels, &h, &cfg).unwrap();
        let tracker = BestTracker::new();
        for index in 0..cfg.chains {
            let rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ index as u64);
            let mut chain: ChainState<CaptureState> = restart(&ctx, &cfg, &tracker, index, rng).unwrap();
            for _ in 0..cfg.iterations {
                mh_step(&mut chain, &ctx, &cfg, &tracker).unwrap();
                let v = chain.value().log_posterior;
                for (p, b) in prefix_bounds(&chain.capture, &pool, &ctx.prior, &h).into_iter().enumerate() {
                    assert!(b >= v - 1e-9, "trial {trial}: prefix {p} of {:?}: Υ {b} < {v}", chain.ids());
                    pairs += 1;
                }
            }
        }
        // The final best list against the bound of each of its prefixes.
        let best = tracker.best().unwrap();
        let state = CaptureState::build(&pool, &labels, &best.ids).unwrap();
        for b in prefix_bounds(&state, &pool, &ctx.prior, &h) {
            assert!(b >= best.value.log_posterior - 1e-9);
        }
    }
    assert!(pairs > 10_000);
}

#[test]
fn prefix_bound_dominates_every_extension_exhaustively() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..30 {
        let n = rng.random_range(5..60);
        let pool = random_pool(&mut rng, n, 5, 6, 3);
        let labels = random_labels(&mut rng, n);
        let h = hp(rng.random_range(0.5..6.0));
        let prior = PriorModel::new(&pool, &h);
        for ids in all_lists(pool.len()) {
            let state = CaptureState::build(&pool, &labels, &ids).unwrap();
            let v = log_posterior(&state, &pool, &prior, &h).unwrap().log_posterior;
            for b in prefix_bounds(&state, &pool, &prior, &h) {
                assert!(b >= v - 1e-9, "{ids:?}");
            }
        }
    }
}

/// All lists attaining the maximum posterior, by enumeration.
fn exhaustive_maps(pool: &RulePool, labels: &BitVector, h: &Hyperparams) -> Vec<Vec<AntecedentId>> {
    let prior = PriorModel::new(pool, h);
    let scored: Vec<(Vec<AntecedentId>, f64)> = all_lists(pool.len())
        .into_iter()
        .map(|ids| {
            let state = CaptureState::build(pool, labels, &ids).unwrap();
            let v = log_posterior(&state, pool, &prior, h).unwrap().log_posterior;
            (ids, v)
        })
        .collect();
    let best = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    scored
        .into_iter()
        .filter(|s| s.1 >= best - 1e-12)
        .map(|s| s.0)
        .collect()
}

#[test]
fn exhaustive_map_length_respects_the_cap() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let mut passed = 0;
    for trial in 0..100 {
        let p = 3;
        let n = rng.random_range(3..40);
        let features: Vec<BitVector> = (0..p)
            .map(|_| BitVector::from_bools((0..n).map(|_| rng.random_bool(0.5))))
            .collect();
        let pool = full_pool(&features);
        let labels = random_labels(&mut rng, n);
        let h = hp(rng.random_range(0.3..7.0));
        let n_pos = labels.count_ones();
        let cap = compute_m_max(p, n_pos, n - n_pos, &h).unwrap();
        let pool_cap = compute_m_max_for_pool(&pool.inventory(), n_pos, n - n_pos, &h);
        let longest = exhaustive_maps(&pool, &labels, &h).iter().map(Vec::len).max().unwrap();
        assert!(longest <= cap, "trial {trial}: MAP length {longest} > m_max {cap}");
        assert!(longest <= pool_cap, "trial {trial}: MAP length {longest} > pool cap {pool_cap}");
        passed += 1;
    }
    assert_eq!(passed, 100);
}

#[test]
fn pool_cap_holds_on_partial_pools() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    for trial in 0..100 {
        let n = rng.random_range(3..40);
        let pool = random_pool(&mut rng, n, 4, 6, 3);
        let labels = random_labels(&mut rng, n);
        let h = hp(rng.random_range(0.3..7.0));
        let n_pos = labels.count_ones();
        let cap = compute_m_max_for_pool(&pool.inventory(), n_pos, n - n_pos, &h);
        let longest = exhaustive_maps(&pool, &labels, &h).iter().map(Vec::len).max().unwrap();
        assert!(longest <= cap, "trial {trial}: MAP length {longest} > pool cap {cap}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Walking any list of distinct conjunctions of `p` features, the
    /// running product of remaining same-size inventories never falls
    /// below the b-vector's running product.
    #[test]
    fn b_vector_bounds_inventory_products(p in 1usize..=6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features: Vec<BitVector> = (0..p).map(|_| BitVector::zeros(1)).collect();
        let pool = full_pool(&features);
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.shuffle(&mut rng);
        let b = build_b_vector(p).unwrap();
        prop_assert_eq!(b.len(), 1 << p);
        let mut remaining = pool.inventory();
        let (mut walk, mut worst) = (0.0f64, 0.0f64);
        for (j, &id) in order.iter().enumerate() {
            let c = pool.cardinality(id);
            walk += (remaining[c] as f64).ln();
            remaining[c] -= 1;
            worst += (b[j + 1] as f64).ln();
            prop_assert!(walk >= worst - 1e-12);
        }
    }

    /// The cap never exceeds the number of antecedents and is monotone in λ.
    #[test]
    fn caps_are_bounded_and_monotone(p in 2usize..=10, n_pos in 0usize..200, n_neg in 0usize..200, l in 0.2f64..12.0) {
        let lo = compute_m_max(p, n_pos, n_neg, &hp(l)).unwrap();
        let hi = compute_m_max(p, n_pos, n_neg, &hp(l + 1.0)).unwrap();
        prop_assert!(lo <= hi);
        prop_assert!(hi < 1 << p);
    }
}

#[test]
fn b_vector_reference_values() {
    assert_eq!(build_b_vector(1).unwrap(), vec![1, 1]);
    assert_eq!(build_b_vector(2).unwrap(), vec![1, 1, 2, 1]);
    assert_eq!(build_b_vector(3).unwrap(), vec![1, 1, 3, 2, 1, 3, 2, 1]);
    assert_eq!(build_b_vector(4).unwrap(), vec![1, 1, 4, 3, 2, 1, 4, 3, 2, 1, 6, 5, 4, 3, 2, 1]);
}
