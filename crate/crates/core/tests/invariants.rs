use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use routebargain_core::bargaining::{flow_exchange, triangle_vertices};
use routebargain_core::metrics::{
    benchmark_strategy, price_of_heterogeneity, weighted_envelope, weighted_price_of_selfishness,
};
use routebargain_core::solvers::{initial_profile, nash_equilibrium_from, StartRule};
use routebargain_core::*;

fn mm1_game() -> impl Strategy<Value = Game> {
    (2usize..=4, 2usize..=4, any::<u64>()).prop_map(|(n, l, seed)| {
        instances::random_mm1(&mut ChaCha8Rng::seed_from_u64(seed), n, l).unwrap()
    })
}

fn standard_game() -> impl Strategy<Value = Game> {
    (2usize..=3, 2usize..=3, any::<u64>()).prop_map(|(n, l, seed)| {
        instances::random_standard(&mut ChaCha8Rng::seed_from_u64(seed), n, l).unwrap()
    })
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

fn solve(game: &Game) -> (Baseline, BargainOutcome) {
    let base = Baseline::compute(game, &SolverOptions::default()).unwrap();
    let out = bargain(game, &base, &BargainOptions::default()).unwrap();
    (base, out)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn equilibrium_is_unique_and_stationary(game in mm1_game()) {
        let opts = SolverOptions::default();
        let a = nash_equilibrium(&game, &opts).unwrap();
        let b = nash_equilibrium_from(&game, &initial_profile(&game, StartRule::FirstLinks), &opts).unwrap();
        prop_assert!(a.converged && b.converged);
        prop_assert!(a.kkt_residual <= 1e-7);
        prop_assert!(a.profile.max_abs_diff(&b.profile) <= 1e-6 * game.total_demand().max(1.0));
    }

    #[test]
    fn optimum_never_costs_more_than_equilibrium(game in standard_game()) {
        let base = Baseline::compute(&game, &SolverOptions::default()).unwrap();
        prop_assert!(base.optimum.kkt_residual <= 1e-7);
        prop_assert!(base.price_of_anarchy() >= 1.0 - 1e-9);
    }

    // Users with the same demand are interchangeable, so they end up with
    // the same cost in the bargained outcome, and relabeling users relabels
    // their costs.
    #[test]
    fn bargain_is_symmetric(
        caps in prop::collection::vec(2.0f64..15.0, 2..=3),
        shared in 0.05f64..0.25,
        other in 0.05f64..0.3,
    ) {
        let total: f64 = caps.iter().sum();
        let demands = [shared * total, other * total, shared * total];
        let (_, out) = solve(&Game::mm1(&caps, &demands).unwrap());
        prop_assert!(close(out.costs.per_user[0], out.costs.per_user[2], 1e-6));

        let swapped = [demands[1], demands[0], demands[2]];
        let (_, out2) = solve(&Game::mm1(&caps, &swapped).unwrap());
        prop_assert!(close(out.costs.per_user[0], out2.costs.per_user[1], 1e-6));
        prop_assert!(close(out.costs.per_user[1], out2.costs.per_user[0], 1e-6));
    }

    // Multiplying every cost by a common factor leaves the equilibrium flows
    // in place and scales the bargaining costs. With three or more users the
    // bargaining profile itself is not unique, so only costs are compared.
    #[test]
    fn uniform_cost_scaling(game in mm1_game(), scale in 0.1f64..10.0) {
        let scaled = Game::new(
            game.links().iter().map(|_| None).collect(),
            game.users()
                .iter()
                .enumerate()
                .map(|(i, u)| {
                    let models = (0..game.n_links()).map(|l| game.model(i, l).clone().weighted(scale)).collect();
                    UserInput::new(u.demand, models)
                })
                .collect(),
        )
        .unwrap();
        let (b1, o1) = solve(&game);
        let (b2, o2) = solve(&scaled);
        let tol = 1e-5 * game.total_demand();
        prop_assert!(b1.nep.profile.max_abs_diff(&b2.nep.profile) <= tol);
        for (a, b) in o1.costs.per_user.iter().zip(&o2.costs.per_user) {
            prop_assert!(close(a * scale, *b, 1e-6));
        }
    }

    #[test]
    fn bargain_is_individually_rational(game in mm1_game()) {
        let (base, out) = solve(&game);
        let scale = base.nep_costs.system.max(1.0);
        for (g, d) in out.gains().iter().zip(&base.nep_costs.per_user) {
            prop_assert!(*g >= -1e-9 * scale, "gain {g} against {d}");
        }
        out.profile.validate(&game).unwrap();
        prop_assert!(out.costs.system >= base.optimum_cost() * (1.0 - 1e-9));
    }

    // Two users on homogeneous links bargain onto the optimal aggregate, so
    // the gains add up to the whole surplus. With more users this fails in
    // general (the bargained system cost can exceed the optimum).
    #[test]
    fn two_user_bargain_exhausts_surplus(
        l in 2usize..=4,
        seed in any::<u64>(),
    ) {
        let game = instances::random_mm1(&mut ChaCha8Rng::seed_from_u64(seed), 2, l).unwrap();
        let (base, out) = solve(&game);
        let total: f64 = out.gains().iter().sum();
        let scale = base.nep_costs.system.max(1.0);
        prop_assert!((total - base.surplus()).abs() <= 1e-6 * scale,
            "{:?}: gains {total} surplus {}", out.method, base.surplus());
    }

    #[test]
    fn proportional_split_shares_optimum_by_demand(game in standard_game()) {
        let base = Baseline::compute(&game, &SolverOptions::default()).unwrap();
        let agg = base.optimum.link_totals();
        let p = proportional_profile(&game, &agg).unwrap();
        let r = game.total_demand();
        let costs = game.evaluate_cost(&p).unwrap();
        for (i, u) in game.users().iter().enumerate() {
            // Per-unit price of each link is common only when the users share
            // cost models, so compare shares only in that case.
            if game.homogeneity().is_homogeneous() && game.shared_models().is_some() {
                prop_assert!(close(costs.per_user[i], u.demand / r * costs.system, 1e-9));
            }
            for l in 0..game.n_links() {
                prop_assert!(close(p.get(i, l), u.demand / r * agg[l], 1e-12));
            }
        }
    }

    #[test]
    fn flow_exchange_keeps_aggregate_and_gains(game in mm1_game()) {
        let base = Baseline::compute(&game, &SolverOptions::default()).unwrap();
        let eps = EpsilonRule::HalfSurplusPerUser.epsilon(&base, game.n_users());
        let Ok(rep) = flow_exchange(&game, &base.nep_costs, &base.optimum, eps) else {
            // Only possible when the surplus is negligible.
            prop_assert!(base.surplus() <= 1e-9 * base.nep_costs.system);
            return Ok(());
        };
        let agg = base.optimum.link_totals();
        for (a, b) in rep.outcome.profile.link_totals().iter().zip(&agg) {
            prop_assert!((a - b).abs() <= 1e-9 * game.total_demand());
        }
        let scale = base.nep_costs.system.max(1.0);
        prop_assert!(rep.outcome.gains().iter().all(|g| *g > -1e-9 * scale));
        prop_assert!(rep.events <= 10 * game.n_users() * game.n_links() + 10);
    }

    #[test]
    fn ascent_never_loses_product(game in mm1_game()) {
        let base = Baseline::compute(&game, &SolverOptions::default()).unwrap();
        let eps = EpsilonRule::HalfSurplusPerUser.epsilon(&base, game.n_users());
        let Ok(start) = flow_exchange(&game, &base.nep_costs, &base.optimum, eps) else {
            return Ok(());
        };
        let start = start.outcome;
        let out = nbs_general(&game, &base, &start.profile, &BargainOptions::default()).unwrap();
        prop_assert!(out.nash_product >= start.nash_product * (1.0 - 1e-9));
    }

    #[test]
    fn price_ordering(game in standard_game()) {
        let opts = SolverOptions::default();
        let cache = SolveCache::compute(&game, &opts, &BargainOptions::default()).unwrap();
        let r = PriceReport::compute(&game, &cache, None, &opts).unwrap();
        prop_assert!(r.pos >= 1.0 - 1e-9);
        prop_assert!(r.poa >= r.pos * (1.0 - 1e-9));
        prop_assert!(r.poi >= 1.0 - 1e-9);
        prop_assert!(close(r.poa, r.pos * r.poi, 1e-9));
    }

    #[test]
    fn heterogeneity_bounded_by_share(game in standard_game()) {
        let opts = SolverOptions::default();
        let base = Baseline::compute(&game, &opts).unwrap();
        let (per_user, max) = price_of_heterogeneity(&game, &base, &opts).unwrap();
        let r = game.total_demand();
        for (p, u) in per_user.iter().zip(game.users()) {
            prop_assert!(*p <= r / u.demand * (1.0 + 1e-6));
            prop_assert!(*p <= max);
        }
    }

    #[test]
    fn benchmark_sits_between_equilibrium_and_perceived_optimum(game in standard_game()) {
        let opts = SolverOptions::default();
        let nep = nash_equilibrium(&game, &opts).unwrap();
        let costs = game.evaluate_cost(&nep.profile).unwrap();
        for i in 0..game.n_users() {
            let b = benchmark_strategy(&game, i, &nep).unwrap();
            let tol = 1e-6 * (1.0 + b.perceived_optimum.abs());
            prop_assert!(costs.per_user[i] <= b.cost + tol);
            prop_assert!(b.cost <= b.perceived_optimum + tol);
            prop_assert!(b.restricted_values.windows(2).all(|w| w[1] <= w[0] + tol));
        }
    }

    #[test]
    fn weighted_selfishness_within_envelope(
        caps in prop::collection::vec(2.0f64..15.0, 2..=3),
        split in 0.1f64..0.9,
        load in 0.3f64..0.8,
        alpha in prop::collection::vec(0.2f64..5.0, 2),
    ) {
        let total: f64 = caps.iter().sum::<f64>() * load;
        let game = Game::mm1(&caps, &[split * total, (1.0 - split) * total]).unwrap();
        let opts = SolverOptions::default();
        let s: f64 = alpha.iter().sum();
        let alpha: Vec<f64> = alpha.iter().map(|a| a / s).collect();
        let (_, out) = solve(&game);
        let (_, hi) = weighted_envelope(&game, &alpha).unwrap();
        let wpos = weighted_price_of_selfishness(&game, &alpha, &out, &opts).unwrap();
        prop_assert!(wpos >= 1.0 - 1e-9);
        prop_assert!(wpos <= hi * (1.0 + 1e-9), "{wpos} > {hi}");
    }
}

#[test]
fn triangle_corners_realized_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = SolverOptions::default();
    for _ in 0..30 {
        let game = instances::random_mm1(&mut rng, 2, 3).unwrap();
        let base = Baseline::compute(&game, &opts).unwrap();
        let d = &base.nep_costs.per_user;
        let j = base.optimum_cost();
        let want = [(d[0], j - d[0]), (j - d[1], d[1]), (d[0], d[1])];
        for (p, w) in triangle_vertices(&game, &base).unwrap().iter().zip(want) {
            p.validate(&game).unwrap();
            let c = game.evaluate_cost(p).unwrap();
            assert!(close(c.per_user[0], w.0, 1e-7) && close(c.per_user[1], w.1, 1e-7), "{c:?} vs {w:?}");
        }
    }
}

// No other profile on the optimal aggregate gives both users less: the
// two-user outcome is Pareto optimal and splits the surplus evenly.
#[test]
fn two_user_outcome_is_pareto_and_even() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let opts = SolverOptions::default();
    for _ in 0..30 {
        let game = instances::random_mm1(&mut rng, 2, 3).unwrap();
        let base = Baseline::compute(&game, &opts).unwrap();
        let out = nbs_two_user(&game, &base).unwrap();
        let g = out.gains();
        assert!(close(g[0], g[1], 1e-9), "{g:?}");
        assert!(close(out.costs.system, base.optimum_cost(), 1e-9));
    }
}

#[test]
fn identical_users_share_optimum_equally() {
    let game = Game::mm1(&[9.0, 4.0, 1.0], &[2.0; 4]).unwrap();
    let base = Baseline::compute(&game, &SolverOptions::default()).unwrap();
    let out = nbs_identical(&game, &base).unwrap();
    for c in &out.costs.per_user {
        assert!(close(*c, base.optimum_cost() / 4.0, 1e-12));
    }
}
