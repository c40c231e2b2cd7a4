mod common;

use proptest::prelude::*;

use scalplus::agent::{AgentConfig, Learner};
use scalplus::bonus::{self, BonusParams, BonusVariant};
use scalplus::continuous::{interval_index, ContinuousScalPlus, Discretization};
use scalplus::harness::env::random_mdp;
use scalplus::mdp::{bellman, span, RandomizedPolicy};
use scalplus::scopt::{self, constrained_greedy, global_feasibility, truncated_operator, ScOptConfig};
use scalplus::statistics::{augment, project_policy, VisitStatistics};

fn mdp_params() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (1usize..=5, 1usize..=3, any::<u64>()).prop_flat_map(|(s, a, seed)| (Just(s), Just(a), 1..=s, Just(seed)))
}

fn value_vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn truncation_caps_span((s, a, g, seed) in mdp_params(), c in 0.0f64..4.0, raw in value_vector(5)) {
        let mdp = random_mdp(s, a, g, seed).unwrap();
        let v = &raw[..s];
        let tv = truncated_operator(&mdp, v, c).unwrap();
        prop_assert!(span(&tv).unwrap() <= c + 1e-12);
        let lv = bellman(&mdp, v).unwrap();
        for (t, l) in tv.iter().zip(&lv) {
            prop_assert!(t <= l);
        }
    }

    #[test]
    fn greedy_contract_on_feasible_points(
        (s, a, g, seed) in mdp_params(),
        c in 0.01f64..3.0,
        raw in prop::collection::vec(0.0f64..1.0, 5),
    ) {
        let mdp = random_mdp(s, a, g, seed).unwrap();
        let v: Vec<f64> = raw[..s].iter().map(|x| x * c).collect();
        if global_feasibility(&mdp, &v, c).unwrap() {
            let pi = constrained_greedy(&mdp, &v, c).unwrap();
            let backup = common::policy_backup(&mdp, &pi, &v);
            let tv = truncated_operator(&mdp, &v, c).unwrap();
            for st in 0..s {
                prop_assert!((backup[st] - tv[st]).abs() <= 1e-10);
                prop_assert!(pi.support(st).len() <= 2);
            }
        }
    }

    #[test]
    fn augmented_mdps_are_globally_feasible(
        (s, a, g, seed) in mdp_params(),
        c in 0.0f64..3.0,
        raw in prop::collection::vec(0.0f64..1.0, 5),
    ) {
        let aug = augment(&random_mdp(s, a, g, seed).unwrap());
        let v: Vec<f64> = raw[..s].iter().map(|x| x * c).collect();
        prop_assert!(global_feasibility(&aug, &v, c).unwrap());
    }

    #[test]
    fn scopt_iterates_respect_cap((s, a, g, seed) in mdp_params(), c in 0.05f64..3.0) {
        let mut stats = VisitStatistics::new(s, a, 1.0);
        let truth = random_mdp(s, a, g, seed).unwrap();
        let mut rng = scalplus::seeding::stream(seed, scalplus::seeding::Role::Environment);
        for i in 0..(seed % 200) {
            let (st, ac) = ((i as usize) % s, (i as usize / s) % a);
            let next = scalplus::seeding::sample_index(truth.kernel(st, ac), &mut rng);
            stats.record(st, ac, truth.reward(st, ac), next).unwrap();
        }
        stats.end_episode();
        let model = stats.empirical_model(0);
        let rewards = (0..s * a).map(|i| model.r_bar(i / a, i % a)).collect();
        let aug = augment(&model.to_mdp(rewards, 1.0).unwrap());
        let cfg = ScOptConfig { contraction_factor: Some(stats.contraction_bound(0)), ..ScOptConfig::new(c, 1e-6) };
        let res = scopt::scopt(&aug, &cfg).unwrap();
        prop_assert!(res.max_iterate_span <= c + 1e-12);
        prop_assert!(span(&res.value).unwrap() <= c + 1e-12);
    }

    #[test]
    fn empirical_rows_and_attraction(
        (s, a, g, seed) in mdp_params(),
        steps in 0usize..300,
        reference in 0usize..5,
    ) {
        let reference = reference % s;
        let truth = random_mdp(s, a, g, seed).unwrap();
        let mut stats = VisitStatistics::new(s, a, 1.0);
        let mut rng = scalplus::seeding::stream(seed, scalplus::seeding::Role::Environment);
        for i in 0..steps {
            let (st, ac) = (i % s, (i / s) % a);
            let next = scalplus::seeding::sample_index(truth.kernel(st, ac), &mut rng);
            stats.record(st, ac, truth.reward(st, ac), next).unwrap();
        }
        stats.end_episode();
        let model = stats.empirical_model(reference);
        for st in 0..s {
            for ac in 0..a {
                let row = model.p_hat(st, ac);
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let n = stats.n_sa(st, ac) as f64;
                prop_assert!(row[reference] >= 1.0 / (n + 1.0) - 1e-15);
            }
        }
    }

    #[test]
    fn projection_sums_copies(raw in prop::collection::vec(0.01f64..1.0, 12)) {
        // 3 states, 2 base actions, 4 augmented actions.
        let mut probs = raw.clone();
        for row in probs.chunks_mut(4) {
            let t: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= t);
            let fix: f64 = 1.0 - row.iter().sum::<f64>();
            row[0] += fix;
        }
        let aug = RandomizedPolicy::new(3, 4, probs.clone()).unwrap();
        let pi = project_policy(&aug).unwrap();
        for s in 0..3 {
            for a in 0..2 {
                prop_assert!((pi.prob(s, a) - probs[s * 4 + a] - probs[s * 4 + 2 + a]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn bonus_monotone_in_n_and_t(n in 0u64..1_000_000, t in 1u64..1_000_000, c in 0.1f64..10.0) {
        let p = BonusParams::new(c, 1.0, 0.05, 6, 2);
        prop_assert!(bonus::bonus_discrete(n + 1, t, 0.0, &p) <= bonus::bonus_discrete(n, t, 0.0, &p));
        prop_assert!(bonus::bonus_discrete(n, t + 1, 0.0, &p) >= bonus::bonus_discrete(n, t, 0.0, &p));
    }

    #[test]
    fn continuous_bonus_dominates_discrete(
        n in 0u64..100_000,
        t in 1u64..100_000,
        l in 0.0f64..10.0,
        alpha in 0.1f64..1.0,
        var in 0.0f64..0.25,
    ) {
        for variant in [BonusVariant::Hoeffding, BonusVariant::BernsteinReward] {
            let p = BonusParams::new(1.5, 1.0, 0.05, 9, 2).with_holder(l, alpha).with_variant(variant);
            prop_assert!(bonus::bonus_continuous(n, t, var, &p).unwrap() >= bonus::bonus_discrete(n, t, var, &p));
        }
    }

    #[test]
    fn interval_index_is_total_and_ordered(x in 0.0f64..=1.0, y in 0.0f64..=1.0, n in 1usize..500) {
        let (i, j) = (interval_index(x, n).unwrap(), interval_index(y, n).unwrap());
        prop_assert!((1..=n).contains(&i));
        if x <= y {
            prop_assert!(i <= j);
        }
        let nf = n as f64;
        prop_assert!(x <= i as f64 / nf + 1e-15);
        if i > 1 {
            prop_assert!(x > (i - 1) as f64 / nf - 1e-15);
        }
    }

    #[test]
    fn lifted_policy_is_piecewise_constant(x in 0.0f64..=1.0, y in 0.0f64..=1.0, seed in any::<u64>()) {
        let grid = Discretization::new(7).unwrap();
        let holder = bonus::Holder { lipschitz: 1.0, alpha: 1.0 };
        let mut agent = ContinuousScalPlus::new(grid, 2, holder, AgentConfig::new(1.0, 0.05, 1.0, seed)).unwrap();
        for k in 0..40u64 {
            let s = (k as f64 * 0.37 + seed as f64 * 1e-20) % 1.0;
            let a = agent.act(s).unwrap();
            agent.observe(s, a, 0.5, (s + 0.3) % 1.0).unwrap();
        }
        if grid.index(x).unwrap() == grid.index(y).unwrap() {
            prop_assert_eq!(agent.policy_at(x).unwrap(), agent.policy_at(y).unwrap());
        }
    }
}
