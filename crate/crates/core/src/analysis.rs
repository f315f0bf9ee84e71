//! Exhaustive analysis over the full profile space.
//!
//! With `N` users and `R` resources the space has `R^N` profiles, indexed
//! by the mixed-radix encoding with user 0 as the least-significant digit.
//! Everything here is bounded by an explicit cap on the space size so a
//! misplaced call cannot silently take days; the default cap is 2^20.

use serde::Serialize;

use crate::game::{Game, Payoff, StrategyProfile};

/// Default bound on `R^N` for exhaustive sweeps.
pub const DEFAULT_CAP: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("profile space of size {size} exceeds the cap {cap}")]
    SpaceTooLarge { size: u128, cap: u64 },
    #[error("profile space size overflows (num_resources^num_users is astronomically large)")]
    SpaceOverflow,
    #[error("operation requires shared payoff tables")]
    SharedTablesRequired,
    #[error("operation requires a complete interference graph")]
    CompleteGraphRequired,
    #[error("operation requires identical payoff tables across resources")]
    IdenticalTablesRequired,
}

/// The set of all strategy profiles of a game, enumerable by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProfileSpace {
    num_users: usize,
    num_resources: usize,
}

impl ProfileSpace {
    pub fn new(num_users: usize, num_resources: usize) -> Self {
        Self { num_users, num_resources }
    }

    pub fn of_game(game: &Game) -> Self {
        Self::new(game.num_users(), game.num_resources())
    }

    /// `R^N`, or `None` if it overflows a u128.
    pub fn size(&self) -> Option<u128> {
        let r = self.num_resources as u128;
        let mut acc: u128 = 1;
        for _ in 0..self.num_users {
            acc = acc.checked_mul(r)?;
        }
        Some(acc)
    }

    /// The size as a `u64` when it fits under `cap`, otherwise an error.
    pub fn size_within(&self, cap: u64) -> Result<u64, AnalysisError> {
        let size = self.size().ok_or(AnalysisError::SpaceOverflow)?;
        if size > u128::from(cap) {
            return Err(AnalysisError::SpaceTooLarge { size, cap });
        }
        Ok(size as u64)
    }

    /// Decodes index -> profile. User `i` holds digit `i` of `index` in
    /// base `R`, user 0 least significant.
    pub fn profile_at(&self, index: u64) -> StrategyProfile {
        let mut choices = vec![0usize; self.num_users];
        self.write_profile(index, &mut choices);
        StrategyProfile::new(choices)
    }

    fn write_profile(&self, mut index: u64, out: &mut [usize]) {
        let r = self.num_resources as u64;
        for slot in out.iter_mut() {
            *slot = (index % r) as usize;
            index /= r;
        }
        debug_assert_eq!(index, 0, "index outside the profile space");
    }

    /// Encodes profile -> index; inverse of [`ProfileSpace::profile_at`].
    pub fn index_of(&self, profile: &StrategyProfile) -> u64 {
        let r = self.num_resources as u64;
        let mut index = 0u64;
        for &choice in profile.choices().iter().rev() {
            debug_assert!(choice < self.num_resources);
            index = index * r + choice as u64;
        }
        index
    }
}

/// All Nash equilibria of the game, in enumeration-index order.
///
/// Errors when the profile space exceeds `cap`.
pub fn enumerate_nash(game: &Game, cap: u64) -> Result<Vec<StrategyProfile>, AnalysisError> {
    enumerate_nash_partitioned(game, cap, 1)
}

/// [`enumerate_nash`] with the index range split across `workers` threads.
/// The ranges are disjoint and merged back in index order, so the result is
/// identical for every worker count.
pub fn enumerate_nash_partitioned(
    game: &Game,
    cap: u64,
    workers: usize,
) -> Result<Vec<StrategyProfile>, AnalysisError> {
    let space = ProfileSpace::of_game(game);
    let size = space.size_within(cap)?;
    let workers = workers.max(1).min(size.max(1) as usize);

    let scan_range = |lo: u64, hi: u64| -> Vec<StrategyProfile> {
        let mut found = Vec::new();
        let mut buf = vec![0usize; game.num_users()];
        for index in lo..hi {
            space.write_profile(index, &mut buf);
            let profile = StrategyProfile::new(buf.clone());
            if game.is_nash(&profile) {
                found.push(profile);
            }
        }
        found
    };

    if workers == 1 {
        return Ok(scan_range(0, size));
    }

    let chunk = size.div_ceil(workers as u64);
    let mut merged = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers as u64)
            .map(|w| {
                let lo = w * chunk;
                let hi = (lo + chunk).min(size);
                scope.spawn(move || scan_range(lo, hi))
            })
            .collect();
        for handle in handles {
            merged.extend(handle.join().expect("worker panicked"));
        }
    });
    Ok(merged)
}

// ---------------------------------------------------------------------------
// Finite improvement property
// ---------------------------------------------------------------------------

/// One edge of a witness cycle: from `profile`, user `mover` switches to
/// `resource` (a strict improvement), reaching the next element's profile.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WitnessStep {
    pub profile: StrategyProfile,
    pub mover: usize,
    pub resource: usize,
}

/// Result of an exhaustive acyclicity check of the improvement graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FipVerdict {
    /// True when every strict-improvement path is finite (the improvement
    /// graph is acyclic), i.e. the game has the finite improvement
    /// property.
    pub holds: bool,
    /// When `holds` is false: a closed loop of strict improvements. The
    /// moves replay from the first profile and return to it.
    pub witness_cycle: Option<Vec<WitnessStep>>,
}

/// Decides the finite improvement property by depth-first search over the
/// improvement graph: nodes are the `R^N` profiles, edges the strict
/// unilateral improvements. Successors are generated on the fly (the graph
/// is never materialized); memory stays at one mark byte per profile plus
/// the DFS stack.
///
/// The DFS uses the classic three-color scheme — unvisited, on the current
/// path, finished — and reports a cycle exactly when it reaches a node
/// already on the current path.
pub fn fip_check(game: &Game, cap: u64) -> Result<FipVerdict, AnalysisError> {
    let space = ProfileSpace::of_game(game);
    let size = space.size_within(cap)?;
    let n = game.num_users();
    let r = game.num_resources();

    const WHITE: u8 = 0;
    const GRAY: u8 = 1;
    const BLACK: u8 = 2;
    let mut color = vec![WHITE; size as usize];

    struct Frame {
        node: u64,
        /// Next (user, resource) candidate to examine.
        next_user: usize,
        next_resource: usize,
        /// Move that led to the child currently being explored.
        move_to_child: Option<(usize, usize)>,
    }

    let mut buf = vec![0usize; n];
    let radix: Vec<u64> = {
        let mut v = Vec::with_capacity(n);
        let mut acc = 1u64;
        for _ in 0..n {
            v.push(acc);
            acc = acc.saturating_mul(r as u64);
        }
        v
    };

    for start in 0..size {
        if color[start as usize] != WHITE {
            continue;
        }
        color[start as usize] = GRAY;
        let mut stack = vec![Frame { node: start, next_user: 0, next_resource: 0, move_to_child: None }];
        while let Some(frame) = stack.last_mut() {
            let node = frame.node;
            space.write_profile(node, &mut buf);
            let profile = StrategyProfile::new(buf.clone());

            // Advance to the next strictly improving successor, if any.
            let mut found: Option<(usize, usize, u64)> = None;
            let mut user = frame.next_user;
            let mut resource = frame.next_resource;
            while user < n {
                let current = profile.resource_of(user);
                while resource < r {
                    if resource != current && game.gain_to(&profile, user, resource) > 0 {
                        // Signed digit replacement done in wrapping u64
                        // arithmetic; the true result is always in range.
                        let child = node.wrapping_add(
                            (resource as u64)
                                .wrapping_sub(current as u64)
                                .wrapping_mul(radix[user]),
                        );
                        found = Some((user, resource, child));
                        break;
                    }
                    resource += 1;
                }
                if found.is_some() {
                    break;
                }
                user += 1;
                resource = 0;
            }

            match found {
                None => {
                    color[node as usize] = BLACK;
                    stack.pop();
                }
                Some((user, resource, child)) => {
                    frame.next_user = user;
                    frame.next_resource = resource + 1;
                    match color[child as usize] {
                        WHITE => {
                            frame.move_to_child = Some((user, resource));
                            color[child as usize] = GRAY;
                            stack.push(Frame {
                                node: child,
                                next_user: 0,
                                next_resource: 0,
                                move_to_child: None,
                            });
                        }
                        GRAY => {
                            // Cycle: `child` is on the current path. The
                            // witness walks the path from `child` to `node`
                            // and closes with this move.
                            frame.move_to_child = Some((user, resource));
                            let pos = stack
                                .iter()
                                .position(|f| f.node == child)
                                .expect("gray node must be on the DFS path");
                            let mut witness = Vec::with_capacity(stack.len() - pos);
                            for f in &stack[pos..] {
                                let (mover, res) =
                                    f.move_to_child.expect("path frames have a chosen move");
                                witness.push(WitnessStep {
                                    profile: space.profile_at(f.node),
                                    mover,
                                    resource: res,
                                });
                            }
                            return Ok(FipVerdict { holds: false, witness_cycle: Some(witness) });
                        }
                        _ => {} // BLACK: already exhausted, no cycle through it.
                    }
                }
            }
        }
    }
    Ok(FipVerdict { holds: true, witness_cycle: None })
}

// ---------------------------------------------------------------------------
// Potentials
// ---------------------------------------------------------------------------

/// Rosenthal's congestion potential `Σ_r Σ_{k=1}^{n_r} g_r(k)`, where `n_r`
/// is the global occupancy of resource `r`.
///
/// The global count only matches what users perceive when everyone
/// interferes with everyone, so this requires a complete graph and shared
/// tables; on such games the function is an exact potential (verified
/// integer-exactly by [`verify_exact_potential`]).
pub fn rosenthal_potential(game: &Game, profile: &StrategyProfile) -> Result<Payoff, AnalysisError> {
    let tables = match game.payoffs() {
        crate::game::PayoffFamily::Shared(t) => t,
        crate::game::PayoffFamily::PerUser(_) => return Err(AnalysisError::SharedTablesRequired),
    };
    if !crate::graph::classify(game.graph()).is_complete {
        return Err(AnalysisError::CompleteGraphRequired);
    }
    let mut occupancy = vec![0usize; game.num_resources()];
    for &choice in profile.choices() {
        occupancy[choice] += 1;
    }
    let mut phi = 0i64;
    for (r, &n_r) in occupancy.iter().enumerate() {
        for k in 1..=n_r {
            phi += tables[r][k - 1];
        }
    }
    Ok(phi)
}

/// A profile/deviation at which a candidate potential fails to track the
/// deviating user's payoff change.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PotentialCounterexample {
    pub profile: StrategyProfile,
    pub user: usize,
    pub resource: usize,
    pub potential_delta: Payoff,
    pub payoff_delta: Payoff,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExactPotentialReport {
    pub holds: bool,
    pub counterexample: Option<PotentialCounterexample>,
    pub profiles_checked: u64,
    pub deviations_checked: u64,
}

/// Checks `candidate(after) - candidate(before) == deviation gain` for
/// every profile and unilateral deviation, with exact integer equality.
/// Stops at the first mismatch and reports it.
pub fn verify_exact_potential_with<F>(
    game: &Game,
    cap: u64,
    candidate: F,
) -> Result<ExactPotentialReport, AnalysisError>
where
    F: Fn(&Game, &StrategyProfile) -> Payoff,
{
    let space = ProfileSpace::of_game(game);
    let size = space.size_within(cap)?;
    let mut deviations = 0u64;
    for index in 0..size {
        let profile = space.profile_at(index);
        let phi_before = candidate(game, &profile);
        for user in 0..game.num_users() {
            let current = profile.resource_of(user);
            for resource in 0..game.num_resources() {
                if resource == current {
                    continue;
                }
                deviations += 1;
                let payoff_delta = game.gain_to(&profile, user, resource);
                let mut after = profile.clone();
                after.set(user, resource);
                let potential_delta = candidate(game, &after) - phi_before;
                if potential_delta != payoff_delta {
                    return Ok(ExactPotentialReport {
                        holds: false,
                        counterexample: Some(PotentialCounterexample {
                            profile,
                            user,
                            resource,
                            potential_delta,
                            payoff_delta,
                        }),
                        profiles_checked: index + 1,
                        deviations_checked: deviations,
                    });
                }
            }
        }
    }
    Ok(ExactPotentialReport {
        holds: true,
        counterexample: None,
        profiles_checked: size,
        deviations_checked: deviations,
    })
}

/// Exhaustively verifies that [`rosenthal_potential`] is an exact potential
/// for the game: every unilateral deviation changes it by exactly the
/// deviating user's payoff change. Requires a complete graph and shared
/// tables (checked up front).
pub fn verify_exact_potential(game: &Game, cap: u64) -> Result<ExactPotentialReport, AnalysisError> {
    // Surface the hypothesis failures before scanning.
    rosenthal_potential(game, &StrategyProfile::uniform(game.num_users(), 0))?;
    verify_exact_potential_with(game, cap, |g, p| {
        rosenthal_potential(g, p).expect("hypotheses checked above")
    })
}

/// Number of interference edges whose endpoints hold the same resource.
///
/// When every resource has the same payoff table this quantity strictly
/// decreases along every strict improvement, so improvement paths are no
/// longer than the edge count.
pub fn mono_edge_potential(game: &Game, profile: &StrategyProfile) -> usize {
    let graph = game.graph();
    let mut count = 0;
    for (i, j) in graph.edges() {
        if profile.resource_of(i) == profile.resource_of(j) {
            count += 1;
        }
    }
    count
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrdinalPotentialReport {
    pub holds: bool,
    pub counterexample: Option<PotentialCounterexample>,
    /// True when every profile was examined; false when the space exceeded
    /// the cap and a fixed-seed sample was used instead.
    pub exhaustive: bool,
    pub profiles_checked: u64,
    pub improving_moves_checked: u64,
}

/// Seed and volume for the sampled fallback of
/// [`verify_ordinal_potential`]; fixed so repeated runs agree.
const ORDINAL_SAMPLE_SEED: u64 = 0xd1a7_5eed;
const ORDINAL_SAMPLE_PROFILES: u64 = 4096;

/// Verifies that [`mono_edge_potential`] is an ordinal potential under
/// identical payoff tables: every strictly improving deviation strictly
/// decreases it. Profiles are swept exhaustively when `R^N <= cap`,
/// otherwise a fixed-seed uniform sample of profiles is checked.
///
/// Errors when the tables are not identical across resources — the
/// guarantee simply does not apply there, and a silent pass would mislead.
pub fn verify_ordinal_potential(game: &Game, cap: u64) -> Result<OrdinalPotentialReport, AnalysisError> {
    if !game.payoffs().is_identical_across_resources() {
        return Err(AnalysisError::IdenticalTablesRequired);
    }
    let space = ProfileSpace::of_game(game);
    let exhaustive = space.size_within(cap).is_ok();

    let mut profiles_checked = 0u64;
    let mut improving = 0u64;
    let mut check_profile = |profile: StrategyProfile| -> Option<PotentialCounterexample> {
        profiles_checked += 1;
        let phi_before = mono_edge_potential(game, &profile) as i64;
        for user in 0..game.num_users() {
            let current = profile.resource_of(user);
            for resource in 0..game.num_resources() {
                if resource == current || game.gain_to(&profile, user, resource) <= 0 {
                    continue;
                }
                improving += 1;
                let mut after = profile.clone();
                after.set(user, resource);
                let phi_after = mono_edge_potential(game, &after) as i64;
                if phi_after >= phi_before {
                    return Some(PotentialCounterexample {
                        profile: profile.clone(),
                        user,
                        resource,
                        potential_delta: phi_after - phi_before,
                        payoff_delta: game.gain_to(&profile, user, resource),
                    });
                }
            }
        }
        None
    };

    let mut counterexample = None;
    if exhaustive {
        let size = space.size_within(cap)?;
        for index in 0..size {
            if let Some(ce) = check_profile(space.profile_at(index)) {
                counterexample = Some(ce);
                break;
            }
        }
    } else {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(ORDINAL_SAMPLE_SEED);
        let (n, r) = (game.num_users(), game.num_resources());
        for _ in 0..ORDINAL_SAMPLE_PROFILES {
            let profile =
                StrategyProfile::new((0..n).map(|_| rng.random_range(0..r)).collect());
            if let Some(ce) = check_profile(profile) {
                counterexample = Some(ce);
                break;
            }
        }
    }
    Ok(OrdinalPotentialReport {
        holds: counterexample.is_none(),
        counterexample,
        exhaustive,
        profiles_checked,
        improving_moves_checked: improving,
    })
}
