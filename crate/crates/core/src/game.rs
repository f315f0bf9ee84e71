//! Congestion games in which payoffs depend on *perceived* congestion.
//!
//! Every user selects exactly one resource. User `i`'s payoff for holding
//! resource `r` is `g_r(k)` where `k` counts the users on `r` within `i`'s
//! closed interference neighborhood (neighbors plus `i` itself). Distant
//! users on the same resource are invisible — the resource is reused across
//! non-interfering parts of the graph. Payoff tables are non-increasing in
//! the count: congestion never helps.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::InterferenceGraph;

/// Payoff value. Integer-valued so potential arguments stay exact.
pub type Payoff = i64;

/// Errors raised while assembling or validating a game.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GameError {
    #[error("game must offer at least one resource")]
    NoResources,
    #[error("{0}")]
    NonMonotone(NonMonotoneTable),
    #[error(
        "table for {owner} resource {resource} has {len} entries but must cover counts 1..={needed}"
    )]
    TableTooShort { owner: TableOwner, resource: usize, len: usize, needed: usize },
    #[error("per-user tables cover {got} users, graph has {expected}")]
    WrongUserCount { got: usize, expected: usize },
    #[error("expected one table per resource ({expected}), got {got}")]
    WrongResourceCount { got: usize, expected: usize },
    #[error("deviation to resource {resource} is a no-op: user {user} already holds it")]
    NoOpDeviation { user: usize, resource: usize },
    #[error("profile has {got} entries, game has {expected} users")]
    ProfileLength { got: usize, expected: usize },
    #[error("profile assigns user {user} resource {resource}, game has {num_resources} resources")]
    ResourceOutOfRange { user: usize, resource: usize, num_resources: usize },
}

/// Details of a payoff table that rises somewhere: `g(n) > g(n-1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonMonotoneTable {
    /// Offending user for per-user tables; `Shared` when the table is common.
    pub owner: TableOwner,
    pub resource: usize,
    /// 1-based count at which the rise is observed.
    pub n: usize,
    pub value: Payoff,
    pub previous: Payoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableOwner {
    Shared,
    User(usize),
}

impl fmt::Display for TableOwner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableOwner::Shared => write!(f, "shared"),
            TableOwner::User(u) => write!(f, "user {u}"),
        }
    }
}

impl fmt::Display for NonMonotoneTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "payoff table ({}, resource {}) is not non-increasing: g({}) = {} exceeds g({}) = {}",
            self.owner,
            self.resource,
            self.n,
            self.value,
            self.n - 1,
            self.previous
        )
    }
}

/// One strategy per user; entry `i` is the resource user `i` occupies.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StrategyProfile(Vec<usize>);

impl StrategyProfile {
    pub fn new(choices: Vec<usize>) -> Self {
        Self(choices)
    }

    /// All users on one resource.
    pub fn uniform(num_users: usize, resource: usize) -> Self {
        Self(vec![resource; num_users])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn resource_of(&self, user: usize) -> usize {
        self.0[user]
    }

    pub fn set(&mut self, user: usize, resource: usize) {
        self.0[user] = resource;
    }

    pub fn choices(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for StrategyProfile {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// Payoff tables, either one table per resource shared by every user, or a
/// full table per (user, resource) pair. `tables[..][k-1]` is the payoff for
/// perceived count `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PayoffFamily {
    Shared(Vec<Vec<Payoff>>),
    PerUser(Vec<Vec<Vec<Payoff>>>),
}

fn check_monotone(owner: TableOwner, resource: usize, table: &[Payoff]) -> Result<(), GameError> {
    for n in 1..table.len() {
        if table[n] > table[n - 1] {
            return Err(GameError::NonMonotone(NonMonotoneTable {
                owner,
                resource,
                n: n + 1,
                value: table[n],
                previous: table[n - 1],
            }));
        }
    }
    Ok(())
}

impl PayoffFamily {
    /// One non-increasing table per resource, shared by all users.
    pub fn shared(tables: Vec<Vec<Payoff>>) -> Result<Self, GameError> {
        if tables.is_empty() {
            return Err(GameError::NoResources);
        }
        for (r, t) in tables.iter().enumerate() {
            check_monotone(TableOwner::Shared, r, t)?;
        }
        Ok(PayoffFamily::Shared(tables))
    }

    /// A non-increasing table per (user, resource) pair. `tables[i][r]` is
    /// user `i`'s table for resource `r`; all users must cover the same
    /// resource set.
    pub fn per_user(tables: Vec<Vec<Vec<Payoff>>>) -> Result<Self, GameError> {
        let num_resources = tables.first().map_or(0, Vec::len);
        if num_resources == 0 {
            return Err(GameError::NoResources);
        }
        for (i, per_resource) in tables.iter().enumerate() {
            if per_resource.len() != num_resources {
                return Err(GameError::WrongResourceCount {
                    got: per_resource.len(),
                    expected: num_resources,
                });
            }
            for (r, t) in per_resource.iter().enumerate() {
                check_monotone(TableOwner::User(i), r, t)?;
            }
        }
        Ok(PayoffFamily::PerUser(tables))
    }

    pub fn num_resources(&self) -> usize {
        match self {
            PayoffFamily::Shared(tables) => tables.len(),
            PayoffFamily::PerUser(tables) => tables.first().map_or(0, Vec::len),
        }
    }

    /// True when every user sees the same table on every resource — the
    /// hypothesis under which the monochromatic-edge potential applies.
    pub fn is_identical_across_resources(&self) -> bool {
        match self {
            PayoffFamily::Shared(tables) => tables.windows(2).all(|w| w[0] == w[1]),
            PayoffFamily::PerUser(_) => false,
        }
    }
}

/// A fully validated game: interference graph plus compatible payoff tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Game {
    graph: InterferenceGraph,
    payoffs: PayoffFamily,
}

impl Game {
    /// Validates table coverage against the graph: user `i`'s table for each
    /// resource must cover counts `1..=|closed neighborhood of i|`. Longer
    /// tables are accepted; the surplus entries are unreachable.
    pub fn new(graph: InterferenceGraph, payoffs: PayoffFamily) -> Result<Self, GameError> {
        match &payoffs {
            PayoffFamily::Shared(tables) => {
                let needed = graph.max_closed_neighborhood();
                for (r, t) in tables.iter().enumerate() {
                    if t.len() < needed {
                        return Err(GameError::TableTooShort {
                            owner: TableOwner::Shared,
                            resource: r,
                            len: t.len(),
                            needed,
                        });
                    }
                }
            }
            PayoffFamily::PerUser(tables) => {
                if tables.len() != graph.num_users() {
                    return Err(GameError::WrongUserCount {
                        got: tables.len(),
                        expected: graph.num_users(),
                    });
                }
                for (i, per_resource) in tables.iter().enumerate() {
                    let needed = graph.closed_neighborhood_size(i);
                    for (r, t) in per_resource.iter().enumerate() {
                        if t.len() < needed {
                            return Err(GameError::TableTooShort {
                                owner: TableOwner::User(i),
                                resource: r,
                                len: t.len(),
                                needed,
                            });
                        }
                    }
                }
            }
        }
        Ok(Self { graph, payoffs })
    }

    pub fn graph(&self) -> &InterferenceGraph {
        &self.graph
    }

    pub fn payoffs(&self) -> &PayoffFamily {
        &self.payoffs
    }

    pub fn num_users(&self) -> usize {
        self.graph.num_users()
    }

    pub fn num_resources(&self) -> usize {
        self.payoffs.num_resources()
    }

    /// User `i`'s payoff table for resource `r`, truncated to the counts `i`
    /// can actually perceive (`1..=|closed neighborhood|`).
    pub fn table(&self, i: usize, r: usize) -> &[Payoff] {
        let len = self.graph.closed_neighborhood_size(i);
        match &self.payoffs {
            PayoffFamily::Shared(tables) => &tables[r][..len],
            PayoffFamily::PerUser(tables) => &tables[i][r][..len],
        }
    }

    fn table_value(&self, i: usize, r: usize, count: usize) -> Payoff {
        let t = self.table(i, r);
        assert!(
            (1..=t.len()).contains(&count),
            "perceived count {count} for user {i} outside table range 1..={}",
            t.len()
        );
        t[count - 1]
    }

    /// Checks that a profile has the right length and in-range resources.
    pub fn validate_profile(&self, profile: &StrategyProfile) -> Result<(), GameError> {
        if profile.len() != self.num_users() {
            return Err(GameError::ProfileLength {
                got: profile.len(),
                expected: self.num_users(),
            });
        }
        let num_resources = self.num_resources();
        for (user, &resource) in profile.choices().iter().enumerate() {
            if resource >= num_resources {
                return Err(GameError::ResourceOutOfRange { user, resource, num_resources });
            }
        }
        Ok(())
    }

    /// How many users on resource `r` user `i` perceives: neighbors of `i`
    /// holding `r`, plus `i` itself if it holds `r`.
    ///
    /// Panics if `i` or `r` is out of range for the game (programmer error;
    /// profiles from external input should pass [`Game::validate_profile`]
    /// first).
    pub fn perceived_count(&self, profile: &StrategyProfile, i: usize, r: usize) -> usize {
        debug_assert_eq!(profile.len(), self.num_users());
        assert!(r < self.num_resources(), "resource {r} out of range");
        let mut count = usize::from(profile.resource_of(i) == r);
        for &j in self.graph.neighbors(i) {
            count += usize::from(profile.resource_of(j) == r);
        }
        count
    }

    /// User `i`'s payoff under `profile`.
    pub fn payoff(&self, profile: &StrategyProfile, i: usize) -> Payoff {
        let r = profile.resource_of(i);
        let count = self.perceived_count(profile, i, r);
        self.table_value(i, r, count)
    }

    /// Payoff change user `i` would see from unilaterally switching to `r`:
    /// `g_r(perceived + 1) - current`. Errors when `r` is `i`'s current
    /// resource (a no-op, not a deviation).
    pub fn deviation_gain(
        &self,
        profile: &StrategyProfile,
        i: usize,
        r: usize,
    ) -> Result<Payoff, GameError> {
        if profile.resource_of(i) == r {
            return Err(GameError::NoOpDeviation { user: i, resource: r });
        }
        Ok(self.gain_to(profile, i, r))
    }

    /// Same as [`Game::deviation_gain`] but assumes `r` differs from `i`'s
    /// current resource. The post-move count is at most the closed
    /// neighborhood size, so the table lookup always lands in range.
    pub(crate) fn gain_to(&self, profile: &StrategyProfile, i: usize, r: usize) -> Payoff {
        debug_assert_ne!(profile.resource_of(i), r);
        let after = self.perceived_count(profile, i, r) + 1;
        self.table_value(i, r, after) - self.payoff(profile, i)
    }

    /// The strictly improving deviation with maximum gain, ties broken by
    /// lowest resource index. `None` when no deviation strictly improves.
    pub fn best_deviation(&self, profile: &StrategyProfile, i: usize) -> Option<Deviation> {
        let current = profile.resource_of(i);
        let mut best: Option<Deviation> = None;
        for r in 0..self.num_resources() {
            if r == current {
                continue;
            }
            let gain = self.gain_to(profile, i, r);
            if gain > 0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Deviation { resource: r, gain });
            }
        }
        best
    }

    /// The lowest-index resource to which `i` can strictly improve.
    pub fn first_improving_deviation(&self, profile: &StrategyProfile, i: usize) -> Option<Deviation> {
        let current = profile.resource_of(i);
        for r in 0..self.num_resources() {
            if r == current {
                continue;
            }
            let gain = self.gain_to(profile, i, r);
            if gain > 0 {
                return Some(Deviation { resource: r, gain });
            }
        }
        None
    }

    /// First user (by index) with a strictly improving deviation, reported
    /// with that user's best deviation. `None` means the profile is a Nash
    /// equilibrium.
    pub fn find_improving_move(&self, profile: &StrategyProfile) -> Option<ImprovingMove> {
        (0..self.num_users()).find_map(|user| {
            self.best_deviation(profile, user)
                .map(|d| ImprovingMove { user, resource: d.resource, gain: d.gain })
        })
    }

    /// True when no user can strictly improve by a unilateral switch.
    pub fn is_nash(&self, profile: &StrategyProfile) -> bool {
        self.find_improving_move(profile).is_none()
    }
}

/// A candidate unilateral switch and the payoff it would add.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Deviation {
    pub resource: usize,
    pub gain: Payoff,
}

/// Witness that a profile is not an equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ImprovingMove {
    pub user: usize,
    pub resource: usize,
    pub gain: Payoff,
}

// ---------------------------------------------------------------------------
// Random instance generation
// ---------------------------------------------------------------------------

/// A random non-increasing table of `len` values drawn from `0..=max_value`.
pub fn random_table<R: Rng>(rng: &mut R, len: usize, max_value: Payoff) -> Vec<Payoff> {
    let mut t: Vec<Payoff> = (0..len).map(|_| rng.random_range(0..=max_value)).collect();
    t.sort_unstable_by(|a, b| b.cmp(a));
    t
}

/// Random shared tables sized for `graph`, one per resource.
pub fn random_shared_tables<R: Rng>(
    rng: &mut R,
    graph: &InterferenceGraph,
    num_resources: usize,
    max_value: Payoff,
) -> PayoffFamily {
    let len = graph.max_closed_neighborhood();
    let tables = (0..num_resources).map(|_| random_table(rng, len, max_value)).collect();
    PayoffFamily::shared(tables).expect("sorted tables are non-increasing")
}

/// Random user-specific tables sized for `graph`.
pub fn random_per_user_tables<R: Rng>(
    rng: &mut R,
    graph: &InterferenceGraph,
    num_resources: usize,
    max_value: Payoff,
) -> PayoffFamily {
    let tables = (0..graph.num_users())
        .map(|i| {
            let len = graph.closed_neighborhood_size(i);
            (0..num_resources).map(|_| random_table(rng, len, max_value)).collect()
        })
        .collect();
    PayoffFamily::per_user(tables).expect("sorted tables are non-increasing")
}

// ---------------------------------------------------------------------------
// Game files
// ---------------------------------------------------------------------------

/// On-disk game description:
///
/// ```json
/// {
///   "num_users": 2,
///   "edges": [[0, 1]],
///   "num_resources": 2,
///   "payoffs": {"mode": "shared", "tables": {"0": [10, 4], "1": [10, 4]}}
/// }
/// ```
///
/// Shared mode keys tables by resource index; per-user mode keys them by
/// `"user,resource"` pairs and must list every pair.
#[derive(Serialize, Deserialize)]
struct GameRepr {
    num_users: usize,
    edges: Vec<(usize, usize)>,
    num_resources: usize,
    payoffs: PayoffRepr,
}

#[derive(Serialize, Deserialize)]
struct PayoffRepr {
    mode: PayoffMode,
    tables: BTreeMap<String, Vec<Payoff>>,
}

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq, Eq, Debug)]
#[serde(rename_all = "snake_case")]
pub enum PayoffMode {
    Shared,
    PerUser,
}

/// Errors raised while reading a game file, wrapping the underlying
/// validation failures with file-level context.
#[derive(Debug, thiserror::Error)]
pub enum GameFileError {
    #[error("malformed game JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("payoff table key {key:?}: {reason}")]
    BadKey { key: String, reason: String },
    #[error("missing payoff table for {0}")]
    MissingTable(String),
}

impl Game {
    /// Parses and fully validates a game from its JSON representation.
    pub fn from_json(text: &str) -> Result<Self, GameFileError> {
        let repr: GameRepr = serde_json::from_str(text)?;
        let graph = InterferenceGraph::from_edges(repr.num_users, &repr.edges)?;
        if repr.num_resources == 0 {
            return Err(GameError::NoResources.into());
        }
        let payoffs = match repr.payoffs.mode {
            PayoffMode::Shared => {
                let mut tables = Vec::with_capacity(repr.num_resources);
                for r in 0..repr.num_resources {
                    let key = r.to_string();
                    let t = repr
                        .payoffs
                        .tables
                        .get(&key)
                        .ok_or_else(|| GameFileError::MissingTable(format!("resource {r}")))?;
                    tables.push(t.clone());
                }
                check_keys(&repr.payoffs.tables, |key| {
                    let r: usize = key.parse().map_err(|_| "expected a resource index")?;
                    if r >= repr.num_resources {
                        return Err("resource index out of range");
                    }
                    Ok(())
                })?;
                PayoffFamily::shared(tables)?
            }
            PayoffMode::PerUser => {
                let mut tables = vec![vec![Vec::new(); repr.num_resources]; repr.num_users];
                check_keys(&repr.payoffs.tables, |key| {
                    let (i, r) = key.split_once(',').ok_or("expected \"user,resource\"")?;
                    let i: usize = i.trim().parse().map_err(|_| "expected a user index")?;
                    let r: usize = r.trim().parse().map_err(|_| "expected a resource index")?;
                    if i >= repr.num_users {
                        return Err("user index out of range");
                    }
                    if r >= repr.num_resources {
                        return Err("resource index out of range");
                    }
                    Ok(())
                })?;
                for (key, t) in &repr.payoffs.tables {
                    let (i, r) = key.split_once(',').expect("validated above");
                    let i: usize = i.trim().parse().expect("validated above");
                    let r: usize = r.trim().parse().expect("validated above");
                    tables[i][r] = t.clone();
                }
                for (i, row) in tables.iter().enumerate() {
                    for (r, table) in row.iter().enumerate() {
                        if table.is_empty() {
                            return Err(GameFileError::MissingTable(format!(
                                "user {i}, resource {r}"
                            )));
                        }
                    }
                }
                PayoffFamily::per_user(tables)?
            }
        };
        Ok(Game::new(graph, payoffs)?)
    }

    /// Serializes the game to the JSON schema accepted by
    /// [`Game::from_json`]. Loading the output reproduces an identical game.
    pub fn to_json(&self) -> String {
        let mut tables = BTreeMap::new();
        let mode = match &self.payoffs {
            PayoffFamily::Shared(ts) => {
                for (r, t) in ts.iter().enumerate() {
                    tables.insert(r.to_string(), t.clone());
                }
                PayoffMode::Shared
            }
            PayoffFamily::PerUser(ts) => {
                for (i, per_resource) in ts.iter().enumerate() {
                    for (r, t) in per_resource.iter().enumerate() {
                        tables.insert(format!("{i},{r}"), t.clone());
                    }
                }
                PayoffMode::PerUser
            }
        };
        let repr = GameRepr {
            num_users: self.num_users(),
            edges: self.graph.edges(),
            num_resources: self.num_resources(),
            payoffs: PayoffRepr { mode, tables },
        };
        serde_json::to_string_pretty(&repr).expect("game serialization cannot fail")
    }
}

fn check_keys(
    tables: &BTreeMap<String, Vec<Payoff>>,
    validate: impl Fn(&str) -> Result<(), &'static str>,
) -> Result<(), GameFileError> {
    for key in tables.keys() {
        validate(key).map_err(|reason| GameFileError::BadKey {
            key: key.clone(),
            reason: reason.to_string(),
        })?;
    }
    Ok(())
}
