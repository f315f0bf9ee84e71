//! Explicit Nash-equilibrium constructions for structured games, plus a
//! hand-built instance proving that strict-improvement dynamics can cycle
//! once three resources are available.
//!
//! Every constructor re-checks its own output with [`Game::is_nash`] before
//! returning it; a verification failure is reported as an error rather than
//! a silently wrong profile.

use crate::dynamics::{self, MoveRule, Outcome, Scheduler, Trace};
use crate::game::{Game, Payoff, PayoffFamily, StrategyProfile};
use crate::graph::{self, InterferenceGraph};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConstructionError {
    #[error("constructor requires shared payoff tables")]
    SharedTablesRequired,
    #[error("graph is not a {0}")]
    WrongTopology(&'static str),
    #[error("constructor requires at least two resources, got {got}")]
    NeedTwoResources { got: usize },
    #[error(
        "tree construction needs the second-ranked resource to pay at least as much alone as the top resource pays when shared: g_{rank2}(1) = {second_alone} < {top_pair} = g_{rank1}(2)"
    )]
    TreeConditionViolated { rank1: usize, rank2: usize, second_alone: Payoff, top_pair: Payoff },
    #[error("no resource pays enough under full local congestion to dominate every alternative")]
    NoDominatingResource,
    #[error("internal dynamics fallback failed: {0}")]
    Dynamics(#[from] crate::dynamics::DynamicsError),
    #[error("fallback dynamics did not converge within {steps} steps")]
    ConvergenceFailed { steps: usize },
    #[error(
        "constructed profile failed equilibrium verification: user {user} improves by {gain} switching to resource {resource}"
    )]
    Verification { user: usize, resource: usize, gain: Payoff },
}

/// Step budget for the internal dynamics fallbacks. Convergence is
/// guaranteed for the games they run on; the budget only guards against
/// implementation bugs.
const FALLBACK_STEP_BUDGET: usize = 10_000_000;

fn shared_tables(game: &Game) -> Result<&[Vec<Payoff>], ConstructionError> {
    match game.payoffs() {
        PayoffFamily::Shared(tables) => Ok(tables),
        PayoffFamily::PerUser(_) => Err(ConstructionError::SharedTablesRequired),
    }
}

/// Resource indices sorted by single-occupant payoff `g_r(1)` descending,
/// ties broken by lowest index.
fn rank_resources(tables: &[Vec<Payoff>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..tables.len()).collect();
    order.sort_by_key(|&r| (std::cmp::Reverse(tables[r][0]), r));
    order
}

fn verify_nash(game: &Game, profile: StrategyProfile) -> Result<StrategyProfile, ConstructionError> {
    match game.find_improving_move(&profile) {
        None => Ok(profile),
        Some(w) => Err(ConstructionError::Verification {
            user: w.user,
            resource: w.resource,
            gain: w.gain,
        }),
    }
}

fn converge_round_robin(
    game: &Game,
    initial: StrategyProfile,
    max_steps: usize,
) -> Result<StrategyProfile, ConstructionError> {
    let trace =
        dynamics::run(game, &initial, &Scheduler::RoundRobin, MoveRule::BestResponse, max_steps)?;
    match trace.outcome {
        Outcome::ConvergedNe => Ok(trace.terminal),
        _ => Err(ConstructionError::ConvergenceFailed { steps: trace.events.len() }),
    }
}

/// Equilibrium for a complete graph with shared tables.
///
/// Starts everyone on the top-ranked resource and runs round-robin best
/// response. On complete graphs perceived congestion equals global
/// congestion, so the classic congestion potential rises with every strict
/// improvement and the run must converge; the step budget derived from the
/// table value span makes that bound explicit.
pub fn construct_ne_complete(game: &Game) -> Result<StrategyProfile, ConstructionError> {
    let tables = shared_tables(game)?;
    if !graph::classify(game.graph()).is_complete {
        return Err(ConstructionError::WrongTopology("complete graph"));
    }
    let ranks = rank_resources(tables);
    let initial = StrategyProfile::uniform(game.num_users(), ranks[0]);
    let values: Vec<Payoff> = tables.iter().flatten().copied().collect();
    let span = match (values.iter().max(), values.iter().min()) {
        (Some(max), Some(min)) => (max - min) as u128,
        _ => 0,
    };
    // Each improving event raises the potential by >= 1 and the potential
    // moves at most num_users * span in total.
    let budget = (game.num_users() as u128 * span + 1).min(FALLBACK_STEP_BUDGET as u128) as usize;
    let terminal = converge_round_robin(game, initial, budget)?;
    verify_nash(game, terminal)
}

/// Equilibrium for a tree: 2-color the tree by depth parity from user 0,
/// assigning the top-ranked resource on even depths and the second-ranked
/// on odd depths. Requires `g_(2)(1) >= g_(1)(2)` — the second resource
/// taken alone must be worth at least the top resource shared by two —
/// otherwise the constructor refuses rather than guessing.
pub fn construct_ne_tree(game: &Game) -> Result<StrategyProfile, ConstructionError> {
    let tables = shared_tables(game)?;
    if !graph::classify(game.graph()).is_tree {
        return Err(ConstructionError::WrongTopology("tree"));
    }
    if game.num_resources() < 2 {
        return Err(ConstructionError::NeedTwoResources { got: game.num_resources() });
    }
    let ranks = rank_resources(tables);
    let (r1, r2) = (ranks[0], ranks[1]);
    let n = game.num_users();
    if n == 1 {
        return verify_nash(game, StrategyProfile::new(vec![r1]));
    }
    if tables[r2][0] < tables[r1][1] {
        return Err(ConstructionError::TreeConditionViolated {
            rank1: r1,
            rank2: r2,
            second_alone: tables[r2][0],
            top_pair: tables[r1][1],
        });
    }
    // BFS depths from user 0. Tree edges connect consecutive levels only,
    // so parity classes are independent sets.
    let g = game.graph();
    let mut depth = vec![usize::MAX; n];
    depth[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for &v in g.neighbors(u) {
            if depth[v] == usize::MAX {
                depth[v] = depth[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let choices = depth.iter().map(|&d| if d % 2 == 0 { r1 } else { r2 }).collect();
    verify_nash(game, StrategyProfile::new(choices))
}

/// Equilibrium for a star: when the second-ranked resource taken alone
/// beats the top resource under full congestion (`g_(2)(1) >= g_(1)(N)`),
/// the hub takes the second resource and the leaves the top one; otherwise
/// everyone takes the top resource.
pub fn construct_ne_star(game: &Game) -> Result<StrategyProfile, ConstructionError> {
    let tables = shared_tables(game)?;
    let center = match graph::star_center(game.graph()) {
        Some(c) => c,
        None => return Err(ConstructionError::WrongTopology("star")),
    };
    let n = game.num_users();
    let ranks = rank_resources(tables);
    let r1 = ranks[0];
    if game.num_resources() == 1 || n == 1 {
        return verify_nash(game, StrategyProfile::uniform(n, r1));
    }
    let r2 = ranks[1];
    let profile = if tables[r2][0] >= tables[r1][n - 1] {
        let mut p = StrategyProfile::uniform(n, r1);
        p.set(center, r2);
        p
    } else {
        StrategyProfile::uniform(n, r1)
    };
    verify_nash(game, profile)
}

/// Equilibrium for a cycle.
///
/// Triangles are complete graphs and delegate to
/// [`construct_ne_complete`]; two-resource games fall back to round-robin
/// best response, which always terminates with two resources. Otherwise
/// let `r`, `b`, `p` be the top three resources by single-occupant payoff:
///
/// * if `g_r(3) >= g_b(1)`, everyone on `r` is an equilibrium;
/// * on an even cycle, alternate `r`/`b` around the ring;
/// * on an odd cycle, alternate `r`/`b` on all but two adjacent users and
///   pick those two from `{b, r, p}` by comparing `g_b(2)`, `g_r(2)`, and
///   `g_p(1)` (four cases).
pub fn construct_ne_cycle(game: &Game) -> Result<StrategyProfile, ConstructionError> {
    let tables = shared_tables(game)?;
    let ring = match graph::cycle_order(game.graph()) {
        Some(ring) => ring,
        None => return Err(ConstructionError::WrongTopology("cycle")),
    };
    let n = game.num_users();
    if n == 3 {
        return construct_ne_complete(game);
    }
    let ranks = rank_resources(tables);
    if game.num_resources() == 1 {
        return verify_nash(game, StrategyProfile::uniform(n, ranks[0]));
    }
    if game.num_resources() == 2 {
        let initial = StrategyProfile::uniform(n, ranks[0]);
        let terminal = converge_round_robin(game, initial, FALLBACK_STEP_BUDGET)?;
        return verify_nash(game, terminal);
    }
    let (r, b, p) = (ranks[0], ranks[1], ranks[2]);
    let g = |res: usize, k: usize| tables[res][k - 1];

    if g(r, 3) >= g(b, 1) {
        return verify_nash(game, StrategyProfile::uniform(n, r));
    }
    let mut choices = vec![r; n];
    if n.is_multiple_of(2) {
        for (pos, &user) in ring.iter().enumerate() {
            choices[user] = if pos % 2 == 0 { r } else { b };
        }
    } else {
        // Ring positions 1..n-2 alternate r, b, ..., r (both ends r); the
        // two remaining adjacent positions 0 and n-1 close the ring.
        for (pos, &user) in ring.iter().enumerate().take(n - 1).skip(1) {
            choices[user] = if pos % 2 == 1 { r } else { b };
        }
        let (first, last) = if g(b, 2) >= g(r, 2) {
            if g(b, 2) >= g(p, 1) {
                (b, b)
            } else {
                (b, p)
            }
        } else if g(r, 2) >= g(p, 1) {
            (b, r)
        } else {
            (b, p)
        };
        choices[ring[0]] = first;
        choices[ring[n - 1]] = last;
    }
    verify_nash(game, StrategyProfile::new(choices))
}

/// Equilibrium for a path using at most the top two resources.
///
/// Everyone on the top resource works when `g_(1)(3) >= g_(2)(1)` (interior
/// users perceive at most three). Otherwise alternate the top two
/// resources along the path; when the top resource shared by two still
/// beats the second resource alone (`g_(1)(2) > g_(2)(1)`), the far
/// endpoint is pinned to the top resource as well so that no lone endpoint
/// on the second resource is tempted to defect.
pub fn construct_ne_path(game: &Game) -> Result<StrategyProfile, ConstructionError> {
    let tables = shared_tables(game)?;
    let order = match graph::path_order(game.graph()) {
        Some(order) => order,
        None => return Err(ConstructionError::WrongTopology("path")),
    };
    let n = game.num_users();
    let ranks = rank_resources(tables);
    let r1 = ranks[0];
    if game.num_resources() == 1 || n == 1 {
        return verify_nash(game, StrategyProfile::uniform(n, r1));
    }
    let r2 = ranks[1];
    let g = |res: usize, k: usize| tables[res][k - 1];

    let profile = if n == 2 {
        if g(r1, 2) >= g(r2, 1) {
            StrategyProfile::uniform(n, r1)
        } else {
            let mut p = StrategyProfile::uniform(n, r1);
            p.set(order[1], r2);
            p
        }
    } else if g(r1, 3) >= g(r2, 1) {
        StrategyProfile::uniform(n, r1)
    } else {
        let pin_far_end = g(r1, 2) > g(r2, 1);
        let mut choices = vec![r1; n];
        for (pos, &user) in order.iter().enumerate() {
            choices[user] = if pos % 2 == 0 { r1 } else { r2 };
        }
        if pin_far_end {
            choices[order[n - 1]] = r1;
        }
        StrategyProfile::new(choices)
    };
    verify_nash(game, profile)
}

/// Equilibrium when one resource dominates: if some `r` satisfies
/// `g_r(D) >= g_s(1)` for every resource `s`, where `D` is the largest
/// closed neighborhood, then everyone on `r` is an equilibrium on any
/// graph. The lowest-index dominating resource is used.
pub fn construct_ne_dominating(game: &Game) -> Result<StrategyProfile, ConstructionError> {
    let tables = shared_tables(game)?;
    let d = game.graph().max_closed_neighborhood();
    let dominating = (0..game.num_resources())
        .find(|&r| (0..game.num_resources()).all(|s| tables[r][d - 1] >= tables[s][0]));
    match dominating {
        Some(r) => verify_nash(game, StrategyProfile::uniform(game.num_users(), r)),
        None => Err(ConstructionError::NoDominatingResource),
    }
}

// ---------------------------------------------------------------------------
// The three-resource improvement loop
// ---------------------------------------------------------------------------

/// A 52-user, 3-resource game together with an 11-move script of strict
/// improvements that returns to its starting profile.
///
/// Four core users move; every other user is a pinned "stub" whose only
/// role is to pad its core neighbor's perceived counts. The loop certifies
/// that three resources suffice for strict-improvement dynamics to cycle
/// forever — in contrast to the two-resource case, which always terminates.
#[derive(Debug, Clone)]
pub struct CounterexampleBundle {
    pub game: Game,
    /// The four moving users, in script order of first appearance.
    pub core: [usize; 4],
    pub initial: StrategyProfile,
    /// Scripted moves as `(user, target resource)`.
    pub script: Vec<(usize, usize)>,
    /// The strictly descending chain of `(resource, perceived count)` table
    /// cells that powers the loop: each scripted move hops from one cell to
    /// the strictly better cell before it.
    pub chain: Vec<(usize, usize)>,
}

/// Stub multiplicity per core user: core user `w` gets `ANCHOR[w]` pinned
/// neighbors on *each* of the three resources.
const ANCHOR: [usize; 4] = [5, 3, 7, 1];

/// The chain of `(resource, perceived count)` cells, strictly decreasing in
/// payoff. Cell `k` is assigned payoff `17 - k`, so consecutive cells
/// differ by exactly one.
const CHAIN: [(usize, usize); 17] = [
    (0, 2),
    (2, 2),
    (0, 3),
    (0, 4),
    (1, 5),
    (2, 4),
    (0, 5),
    (0, 6),
    (2, 6),
    (2, 7),
    (1, 6),
    (0, 7),
    (2, 10),
    (0, 8),
    (0, 11),
    (1, 8),
    (2, 11),
];

/// Expected `(from resource, count before, to resource, count after)` for
/// each scripted move, derived by hand from the gadget topology. The
/// builder re-derives the counts from the actual graph and refuses to
/// produce a bundle that deviates.
const STEP_CELLS: [(usize, usize, usize, usize); 11] = [
    (2, 6, 0, 6),
    (1, 5, 0, 4),
    (2, 2, 0, 2),
    (1, 8, 0, 11),
    (0, 7, 1, 6),
    (0, 3, 2, 2),
    (0, 5, 2, 4),
    (0, 8, 2, 10),
    (1, 6, 2, 7),
    (2, 11, 1, 8),
    (2, 4, 1, 5),
];

/// Builds the loop instance and verifies it cell by cell.
///
/// Construction: four core users A, B, C, D (indices 0..4) with C adjacent
/// to each of A, B, D and no other core edges; core user `w` additionally
/// has `ANCHOR[w]` stubs pinned on each resource. Payoff tables are
/// synthesized from [`CHAIN`] — cell `k` gets value `17 - k` — and extended
/// to full length non-increasingly: below a resource's smallest constrained
/// count the values cascade upward by one per step, gaps take the previous
/// constrained value, and the tail drops one below the last constrained
/// value (floored at zero).
///
/// Panics if any internal consistency check fails; that would be a bug in
/// this module, not bad input.
pub fn build_counterexample() -> CounterexampleBundle {
    let num_resources = 3;
    let core = [0usize, 1, 2, 3];
    let (a, b_user, c, d) = (0usize, 1, 2, 3);

    // Core star on C plus pinned stubs.
    let mut edges = vec![(a, c), (b_user, c), (d, c)];
    let mut stub_resource = Vec::new(); // resource of stub user 4 + k
    for (w, &count) in ANCHOR.iter().enumerate() {
        for resource in 0..num_resources {
            for _ in 0..count {
                let stub = 4 + stub_resource.len();
                stub_resource.push(resource);
                edges.push((w, stub));
            }
        }
    }
    let num_users = 4 + stub_resource.len();
    let graph = InterferenceGraph::from_edges(num_users, &edges)
        .expect("gadget edge list is well-formed");
    assert_eq!(num_users, 52, "gadget must have 52 users");
    assert_eq!(graph.degree(c), 24, "user C must see 3 core plus 21 stub neighbors");

    // Payoff synthesis from the chain.
    let table_len = graph.max_closed_neighborhood();
    let mut tables = Vec::with_capacity(num_resources);
    for resource in 0..num_resources {
        let constrained: Vec<(usize, Payoff)> = CHAIN
            .iter()
            .enumerate()
            .filter(|(_, &(res, _))| res == resource)
            .map(|(k, &(_, count))| (count, 17 - k as Payoff))
            .collect();
        let mut table = vec![0; table_len];
        let (first_count, first_value) = constrained[0];
        for n in (1..first_count).rev() {
            // Cascade upward below the first constrained count.
            table[n - 1] = first_value + (first_count - n) as Payoff;
        }
        let mut prev: Option<(usize, Payoff)> = None;
        for &(count, value) in &constrained {
            if let Some((prev_count, prev_value)) = prev {
                for n in (prev_count + 1)..count {
                    table[n - 1] = prev_value;
                }
            }
            table[count - 1] = value;
            prev = Some((count, value));
        }
        let (last_count, last_value) = *constrained.last().expect("every resource is constrained");
        for n in (last_count + 1)..=table_len {
            table[n - 1] = (last_value - 1).max(0);
        }
        tables.push(table);
    }

    // The chain must be strictly decreasing as read out of the tables.
    for window in CHAIN.windows(2) {
        let [(res_hi, n_hi), (res_lo, n_lo)] = [window[0], window[1]];
        assert!(
            tables[res_hi][n_hi - 1] > tables[res_lo][n_lo - 1],
            "chain cell ({res_hi},{n_hi}) must strictly exceed ({res_lo},{n_lo})"
        );
    }

    let payoffs = PayoffFamily::shared(tables).expect("synthesized tables are non-increasing");
    let game = Game::new(graph, payoffs).expect("tables cover every neighborhood");

    // Initial occupancies: A and D on resource 2, B and C on resource 1,
    // stubs pinned.
    let mut choices = vec![0usize; num_users];
    choices[a] = 2;
    choices[b_user] = 1;
    choices[c] = 1;
    choices[d] = 2;
    for (k, &resource) in stub_resource.iter().enumerate() {
        choices[4 + k] = resource;
    }
    let initial = StrategyProfile::new(choices);

    let script: Vec<(usize, usize)> = vec![
        (a, 0),
        (b_user, 0),
        (d, 0),
        (c, 0),
        (a, 1),
        (d, 2),
        (b_user, 2),
        (c, 2),
        (a, 2),
        (c, 1),
        (b_user, 1),
    ];

    // Walk the script, checking every move against the expected table
    // cells and strict improvement.
    let mut state = initial.clone();
    for (k, (&(user, to), &(from_res, from_count, to_res, to_count))) in
        script.iter().zip(STEP_CELLS.iter()).enumerate()
    {
        let step = k + 1;
        let from = state.resource_of(user);
        assert_eq!(from, from_res, "step {step}: mover must leave resource {from_res}");
        assert_eq!(to, to_res, "step {step}: mover must join resource {to_res}");
        assert_eq!(
            game.perceived_count(&state, user, from),
            from_count,
            "step {step}: count perceived on the old resource"
        );
        assert_eq!(
            game.perceived_count(&state, user, to) + 1,
            to_count,
            "step {step}: count perceived on the new resource after moving"
        );
        let old_payoff = game.payoff(&state, user);
        state.set(user, to);
        let new_payoff = game.payoff(&state, user);
        assert!(
            new_payoff > old_payoff,
            "step {step}: move must strictly improve ({old_payoff} -> {new_payoff})"
        );
    }
    assert_eq!(state, initial, "script must return to the initial profile");

    CounterexampleBundle { game, core, initial, script, chain: CHAIN.to_vec() }
}

/// Replays the bundle's script through the dynamics validator. The replay
/// enforces strict improvement at every step and reports the closing loop;
/// any violation aborts with the offending step.
pub fn replay_counterexample(
    bundle: &CounterexampleBundle,
) -> Result<Trace, crate::dynamics::DynamicsError> {
    dynamics::replay(&bundle.game, &bundle.initial, &bundle.script)
}
