//! Randomized invariant checks over the whole library surface: graph
//! structure, payoff locality, dynamics determinism and strictness,
//! two-resource termination guarantees, reverse-change diagnostics, and
//! serialization round trips.

use cgrr::analysis::{self, ProfileSpace, DEFAULT_CAP};
use cgrr::dynamics::{self, MoveRule, Outcome, Scheduler};
use cgrr::game::{random_per_user_tables, random_shared_tables};
use cgrr::{constructions, graph, Game, InterferenceGraph, StrategyProfile};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arb_graph(max_users: usize) -> impl Strategy<Value = InterferenceGraph> {
    (1..=max_users, 0.0..=1.0f64, any::<u64>())
        .prop_map(|(n, p, seed)| graph::gnp_random(n, p, seed).unwrap())
}

/// Random game with per-user tables; resources drawn from `resources`.
fn arb_game(
    max_users: usize,
    resources: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = Game> {
    (arb_graph(max_users), resources, any::<u64>()).prop_map(|(g, r, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let payoffs = random_per_user_tables(&mut rng, &g, r, 30);
        Game::new(g, payoffs).unwrap()
    })
}

/// A game plus a profile valid for it.
fn arb_game_and_profile(
    max_users: usize,
    resources: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = (Game, StrategyProfile)> {
    arb_game(max_users, resources).prop_flat_map(|game| {
        let n = game.num_users();
        let r = game.num_resources();
        (Just(game), proptest::collection::vec(0..r, n))
            .prop_map(|(game, choices)| (game, StrategyProfile::new(choices)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjacency_is_symmetric_and_loop_free(g in arb_graph(9)) {
        let mut degree_sum = 0;
        for u in 0..g.num_users() {
            degree_sum += g.degree(u);
            for &v in g.neighbors(u) {
                prop_assert_ne!(u, v, "self-loop at {}", u);
                prop_assert!(g.neighbors(v).contains(&u), "asymmetric edge ({}, {})", u, v);
            }
        }
        prop_assert_eq!(degree_sum, 2 * g.num_edges());
        prop_assert_eq!(g.edges().len(), g.num_edges());
    }

    #[test]
    fn payoff_ignores_users_outside_the_closed_neighborhood(
        (game, profile) in arb_game_and_profile(8, 2..=3),
        mover_pick in any::<proptest::sample::Index>(),
        resource_pick in any::<proptest::sample::Index>(),
    ) {
        let mover = mover_pick.index(game.num_users());
        let target = resource_pick.index(game.num_resources());
        let mut shifted = profile.clone();
        shifted.set(mover, target);
        let g = game.graph();
        for observer in 0..game.num_users() {
            let local = observer == mover || g.has_edge(observer, mover);
            if !local {
                prop_assert_eq!(
                    game.payoff(&profile, observer),
                    game.payoff(&shifted, observer),
                    "non-neighbor {} saw its payoff change when {} moved",
                    observer,
                    mover
                );
            }
        }
    }

    #[test]
    fn payoff_tables_never_reward_extra_congestion(
        (game, profile) in arb_game_and_profile(8, 2..=3),
    ) {
        // Adding one more same-resource occupant to a user's neighborhood
        // can never raise that user's payoff.
        let g = game.graph();
        for user in 0..game.num_users() {
            let r = profile.resource_of(user);
            for &nb in g.neighbors(user) {
                if profile.resource_of(nb) != r {
                    let before = game.payoff(&profile, user);
                    let mut crowded = profile.clone();
                    crowded.set(nb, r);
                    prop_assert!(game.payoff(&crowded, user) <= before);
                }
            }
        }
    }

    #[test]
    fn runs_are_deterministic_in_the_seed(
        (game, initial) in arb_game_and_profile(7, 2..=3),
        seed in any::<u64>(),
        rule in prop_oneof![Just(MoveRule::BestResponse), Just(MoveRule::FirstImproving)],
    ) {
        let sched = Scheduler::UniformRandom { seed };
        let a = dynamics::run(&game, &initial, &sched, rule, 200).unwrap();
        let b = dynamics::run(&game, &initial, &sched, rule, 200).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn every_event_strictly_improves_and_replay_agrees(
        (game, initial) in arb_game_and_profile(7, 2..=3),
        seed in any::<u64>(),
    ) {
        let sched = Scheduler::UniformRandom { seed };
        let trace = dynamics::run(&game, &initial, &sched, MoveRule::BestResponse, 300).unwrap();
        for e in &trace.events {
            prop_assert!(e.new_payoff > e.old_payoff, "event {} does not improve", e.t);
            prop_assert_ne!(e.from, e.to);
        }
        let moves: Vec<(usize, usize)> = trace.events.iter().map(|e| (e.mover, e.to)).collect();
        let replayed = dynamics::replay(&game, &initial, &moves).unwrap();
        prop_assert_eq!(&replayed.terminal, &trace.terminal);
        prop_assert_eq!(replayed.events, trace.events);
    }

    #[test]
    fn two_resource_games_always_reach_equilibrium(
        (game, initial) in arb_game_and_profile(6, 2..=2),
        seed in any::<u64>(),
    ) {
        // Generous budget: termination is guaranteed with two resources, so
        // the step limit must never be the thing that stops us.
        let sched = Scheduler::UniformRandom { seed };
        let trace = dynamics::run(&game, &initial, &sched, MoveRule::BestResponse, 100_000).unwrap();
        prop_assert_eq!(trace.outcome, Outcome::ConvergedNe);
        prop_assert!(game.is_nash(&trace.terminal));
    }

    #[test]
    fn reverse_changes_satisfy_the_majority_inequality(
        (game, initial) in arb_game_and_profile(6, 2..=2),
        seed in any::<u64>(),
    ) {
        let sched = Scheduler::UniformRandom { seed };
        let trace = dynamics::run(&game, &initial, &sched, MoveRule::BestResponse, 100_000).unwrap();
        let report = dynamics::check_reverse_change_inequality(&game, &trace).unwrap();
        prop_assert!(report.holds(), "violations: {:?}", report.violations);
        for pair in dynamics::reverse_change_pairs(&game, &trace).unwrap() {
            prop_assert!(pair.ss.len() > pair.oo.len());
        }
    }

    #[test]
    fn trace_jsonl_round_trips(
        (game, initial) in arb_game_and_profile(6, 2..=3),
        seed in any::<u64>(),
    ) {
        let sched = Scheduler::UniformRandom { seed };
        let trace = dynamics::run(&game, &initial, &sched, MoveRule::BestResponse, 100).unwrap();
        let text = trace.to_jsonl();
        let back = cgrr::dynamics::Trace::from_jsonl(&text).unwrap();
        prop_assert_eq!(back, trace);
    }

    #[test]
    fn game_json_round_trips(game in arb_game(6, 1..=3)) {
        let text = game.to_json();
        let back = Game::from_json(&text).unwrap();
        prop_assert_eq!(back.to_json(), text);
        prop_assert_eq!(back.num_users(), game.num_users());
        prop_assert_eq!(back.num_resources(), game.num_resources());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn enumeration_agrees_with_pointwise_equilibrium_checks(
        game in arb_game(4, 2..=3),
    ) {
        let nash = analysis::enumerate_nash(&game, DEFAULT_CAP).unwrap();
        let space = ProfileSpace::of_game(&game);
        let size = space.size_within(DEFAULT_CAP).unwrap();
        let mut seen = 0;
        for index in 0..size {
            let profile = space.profile_at(index);
            let member = nash.contains(&profile);
            prop_assert_eq!(member, game.is_nash(&profile));
            if member {
                seen += 1;
            }
        }
        prop_assert_eq!(seen, nash.len());
    }

    #[test]
    fn two_resource_games_have_acyclic_improvement_graphs(
        game in arb_game(5, 2..=2),
    ) {
        let verdict = analysis::fip_check(&game, DEFAULT_CAP).unwrap();
        prop_assert!(verdict.holds);
        prop_assert!(verdict.witness_cycle.is_none());
    }

    #[test]
    fn constructors_only_return_verified_equilibria(
        n in 1usize..=8,
        r in 1usize..=3,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (kind, build) in [
            (graph::complete(n).unwrap(), constructions::construct_ne_complete as fn(&Game) -> _),
            (graph::star(n).unwrap(), constructions::construct_ne_star),
            (graph::path(n).unwrap(), constructions::construct_ne_path),
            (graph::random_tree(n, seed).unwrap(), constructions::construct_ne_tree),
        ] {
            let payoffs = random_shared_tables(&mut rng, &kind, r, 40);
            let game = Game::new(kind, payoffs).unwrap();
            if let Ok(profile) = build(&game) {
                prop_assert!(game.is_nash(&profile));
            }
        }
        if n >= 3 {
            let ring = graph::cycle(n).unwrap();
            let payoffs = random_shared_tables(&mut rng, &ring, r, 40);
            let game = Game::new(ring, payoffs).unwrap();
            if let Ok(profile) = constructions::construct_ne_cycle(&game) {
                prop_assert!(game.is_nash(&profile));
            }
        }
        let gnp = graph::gnp_random(n, 0.5, seed).unwrap();
        let payoffs = random_shared_tables(&mut rng, &gnp, r, 40);
        let game = Game::new(gnp, payoffs).unwrap();
        if let Ok(profile) = constructions::construct_ne_dominating(&game) {
            prop_assert!(game.is_nash(&profile));
        }
    }
}
