//! Undirected interference graphs over user indices `0..n`.
//!
//! An edge `{i, j}` means users `i` and `j` interfere: each one's payoff
//! depends on whether the other occupies the same resource. Interference is
//! inherently mutual here — edges are unordered pairs, so an asymmetric
//! relation is unrepresentable by construction.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Errors raised while building or validating an interference graph.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("graph must have at least one user")]
    NoUsers,
    #[error("edge ({i}, {j}) references a user outside 0..{num_users}")]
    EndpointOutOfRange { i: usize, j: usize, num_users: usize },
    #[error("self-loop ({u}, {u}) is not a valid interference edge")]
    SelfLoop { u: usize },
    #[error("a cycle needs at least 3 users, got {n}")]
    CycleTooSmall { n: usize },
    #[error("edge probability {p} is outside [0, 1]")]
    BadProbability { p: f64 },
}

/// A simple undirected graph on users `0..num_users`.
///
/// Adjacency lists are kept sorted so neighbor iteration, serialization, and
/// every algorithm built on top of them are deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterferenceGraph {
    num_users: usize,
    adj: Vec<Vec<usize>>,
    num_edges: usize,
}

impl InterferenceGraph {
    /// Builds a graph from an explicit edge list. Duplicate edges collapse;
    /// self-loops and out-of-range endpoints are rejected.
    pub fn from_edges(num_users: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if num_users == 0 {
            return Err(GraphError::NoUsers);
        }
        let mut set: BTreeSet<(usize, usize)> = BTreeSet::new();
        for &(i, j) in edges {
            if i >= num_users || j >= num_users {
                return Err(GraphError::EndpointOutOfRange { i, j, num_users });
            }
            if i == j {
                return Err(GraphError::SelfLoop { u: i });
            }
            set.insert((i.min(j), i.max(j)));
        }
        let mut adj = vec![Vec::new(); num_users];
        for &(i, j) in &set {
            adj[i].push(j);
            adj[j].push(i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Ok(Self { num_users, adj, num_edges: set.len() })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    /// Degree of user `i` (neighbors, excluding `i` itself).
    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    /// Size of the closed neighborhood `{i} ∪ neighbors(i)`. This is the
    /// largest same-resource count user `i` can ever perceive.
    pub fn closed_neighborhood_size(&self, i: usize) -> usize {
        self.degree(i) + 1
    }

    /// Largest closed neighborhood in the graph.
    pub fn max_closed_neighborhood(&self) -> usize {
        (0..self.num_users).map(|i| self.closed_neighborhood_size(i)).max().unwrap_or(1)
    }

    /// The neighbors of `i` in increasing order; `i` itself is not included.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.adj[i].binary_search(&j).is_ok()
    }

    /// All edges as `(i, j)` pairs with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_edges);
        for i in 0..self.num_users {
            for &j in &self.adj[i] {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.num_users];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in self.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.num_users
    }
}

/// Topology predicates of interest to the equilibrium constructors. The flags
/// are not exclusive: a 2-user path is simultaneously a path, a tree, a star,
/// and a complete graph, and a triangle is both a cycle and complete.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyTags {
    pub is_complete: bool,
    pub is_tree: bool,
    pub is_star: bool,
    pub is_cycle: bool,
    pub is_path: bool,
}

/// Classifies a graph against the shapes with dedicated equilibrium
/// constructions.
pub fn classify(g: &InterferenceGraph) -> TopologyTags {
    let n = g.num_users();
    let connected = g.is_connected();
    let is_tree = connected && g.num_edges() == n - 1;
    let is_complete = g.num_edges() == n * (n - 1) / 2;
    // A star has some hub adjacent to every other user; for n <= 2 that is
    // vacuously/trivially satisfied by any tree.
    let is_star = is_tree && (0..n).any(|i| g.degree(i) == n - 1);
    let is_cycle = connected && n >= 3 && (0..n).all(|i| g.degree(i) == 2);
    let is_path = is_tree && (0..n).all(|i| g.degree(i) <= 2);
    TopologyTags { is_complete, is_tree, is_star, is_cycle, is_path }
}

/// For a star graph, the hub user (adjacent to all others). Lowest index wins
/// when several qualify (n <= 2). Returns `None` when the graph is not a star.
pub fn star_center(g: &InterferenceGraph) -> Option<usize> {
    if !classify(g).is_star {
        return None;
    }
    let n = g.num_users();
    (0..n).find(|&i| g.degree(i) == n - 1)
}

/// For a cycle graph, the users in ring order starting at 0, walking first
/// toward 0's smaller neighbor. Returns `None` when the graph is not a cycle.
pub fn cycle_order(g: &InterferenceGraph) -> Option<Vec<usize>> {
    if !classify(g).is_cycle {
        return None;
    }
    let n = g.num_users();
    let mut order = Vec::with_capacity(n);
    let mut prev = 0usize;
    let mut cur = g.neighbors(0)[0];
    order.push(0);
    while cur != 0 {
        order.push(cur);
        let nb = g.neighbors(cur);
        let next = if nb[0] == prev { nb[1] } else { nb[0] };
        prev = cur;
        cur = next;
    }
    debug_assert_eq!(order.len(), n);
    Some(order)
}

/// For a path graph, the users in order from one endpoint to the other. The
/// walk starts at the lowest-index endpoint. Returns `None` for non-paths.
pub fn path_order(g: &InterferenceGraph) -> Option<Vec<usize>> {
    if !classify(g).is_path {
        return None;
    }
    let n = g.num_users();
    if n == 1 {
        return Some(vec![0]);
    }
    let start = (0..n).find(|&i| g.degree(i) == 1).expect("path with n >= 2 has an endpoint");
    let mut order = Vec::with_capacity(n);
    order.push(start);
    let mut prev = start;
    let mut cur = g.neighbors(start)[0];
    while g.degree(cur) == 2 {
        order.push(cur);
        let nb = g.neighbors(cur);
        let next = if nb[0] == prev { nb[1] } else { nb[0] };
        prev = cur;
        cur = next;
    }
    order.push(cur);
    debug_assert_eq!(order.len(), n);
    Some(order)
}

/// Requested graph shape for [`build_graph`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GraphKind {
    Complete { n: usize },
    Star { n: usize },
    Path { n: usize },
    Cycle { n: usize },
    /// Uniform random labelled tree, deterministic in the seed.
    RandomTree { n: usize, seed: u64 },
    /// Erdős–Rényi G(n, p), deterministic in the seed.
    GnpRandom { n: usize, p: f64, seed: u64 },
    EdgeList { n: usize, edges: Vec<(usize, usize)> },
}

/// Builds a graph of the requested shape. All generators are deterministic:
/// the random families depend only on their parameters and seed.
pub fn build_graph(kind: &GraphKind) -> Result<InterferenceGraph, GraphError> {
    match kind {
        GraphKind::Complete { n } => complete(*n),
        GraphKind::Star { n } => star(*n),
        GraphKind::Path { n } => path(*n),
        GraphKind::Cycle { n } => cycle(*n),
        GraphKind::RandomTree { n, seed } => random_tree(*n, *seed),
        GraphKind::GnpRandom { n, p, seed } => gnp_random(*n, *p, *seed),
        GraphKind::EdgeList { n, edges } => InterferenceGraph::from_edges(*n, edges),
    }
}

/// Complete graph on `n` users: everyone interferes with everyone.
pub fn complete(n: usize) -> Result<InterferenceGraph, GraphError> {
    let mut edges = Vec::with_capacity(n.saturating_mul(n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push((i, j));
        }
    }
    InterferenceGraph::from_edges(n, &edges)
}

/// Star with hub 0 and leaves `1..n`.
pub fn star(n: usize) -> Result<InterferenceGraph, GraphError> {
    let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
    InterferenceGraph::from_edges(n, &edges)
}

/// Path `0 - 1 - ... - n-1`.
pub fn path(n: usize) -> Result<InterferenceGraph, GraphError> {
    let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
    InterferenceGraph::from_edges(n, &edges)
}

/// Cycle `0 - 1 - ... - n-1 - 0`; requires `n >= 3`.
pub fn cycle(n: usize) -> Result<InterferenceGraph, GraphError> {
    if n < 3 {
        return Err(GraphError::CycleTooSmall { n });
    }
    let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
    edges.push((0, n - 1));
    InterferenceGraph::from_edges(n, &edges)
}

/// Random labelled tree: each user `i >= 1` attaches to a uniformly random
/// earlier user.
pub fn random_tree(n: usize, seed: u64) -> Result<InterferenceGraph, GraphError> {
    if n == 0 {
        return Err(GraphError::NoUsers);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<_> = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
    InterferenceGraph::from_edges(n, &edges)
}

/// G(n, p): each unordered pair becomes an edge independently with
/// probability `p`. Pairs are examined in lexicographic order, so the result
/// is a pure function of `(n, p, seed)`.
pub fn gnp_random(n: usize, p: f64, seed: u64) -> Result<InterferenceGraph, GraphError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(GraphError::BadProbability { p });
    }
    if n == 0 {
        return Err(GraphError::NoUsers);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    InterferenceGraph::from_edges(n, &edges)
}

/// Serialized form: `{"num_users": N, "edges": [[i, j], ...]}` with each edge
/// listed once, smaller index first.
#[derive(Serialize, Deserialize)]
struct GraphRepr {
    num_users: usize,
    edges: Vec<(usize, usize)>,
}

impl Serialize for InterferenceGraph {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        GraphRepr { num_users: self.num_users, edges: self.edges() }.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for InterferenceGraph {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let repr = GraphRepr::deserialize(de)?;
        InterferenceGraph::from_edges(repr.num_users, &repr.edges)
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_self_loops_and_bad_endpoints() {
        assert_eq!(InterferenceGraph::from_edges(0, &[]), Err(GraphError::NoUsers));
        assert_eq!(
            InterferenceGraph::from_edges(3, &[(1, 1)]),
            Err(GraphError::SelfLoop { u: 1 })
        );
        assert_eq!(
            InterferenceGraph::from_edges(3, &[(0, 3)]),
            Err(GraphError::EndpointOutOfRange { i: 0, j: 3, num_users: 3 })
        );
        assert_eq!(cycle(2), Err(GraphError::CycleTooSmall { n: 2 }));
        assert_eq!(gnp_random(4, 1.5, 0).unwrap_err(), GraphError::BadProbability { p: 1.5 });
    }

    #[test]
    fn duplicate_and_reversed_edges_collapse() {
        let g = InterferenceGraph::from_edges(3, &[(0, 1), (1, 0), (0, 1)]).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
        assert_eq!(g.neighbors(2), &[] as &[usize]);
    }

    #[test]
    fn neighbor_relation_is_symmetric_and_irreflexive() {
        let g = gnp_random(12, 0.5, 7).unwrap();
        for i in 0..12 {
            assert!(!g.has_edge(i, i));
            for &j in g.neighbors(i) {
                assert!(g.neighbors(j).contains(&i));
            }
        }
    }

    #[test]
    fn handshake_sum_of_degrees_is_twice_edges() {
        for seed in 0..5 {
            let g = gnp_random(10, 0.4, seed).unwrap();
            let total: usize = (0..10).map(|i| g.degree(i)).sum();
            assert_eq!(total, 2 * g.num_edges());
        }
    }

    #[test]
    fn complete_graph_shape() {
        let g = complete(5).unwrap();
        assert_eq!(g.num_edges(), 10);
        assert!(classify(&g).is_complete);
        assert_eq!(g.max_closed_neighborhood(), 5);
    }

    #[test]
    fn classify_path_of_two_holds_every_degenerate_tag() {
        let g = path(2).unwrap();
        let tags = classify(&g);
        assert!(tags.is_path && tags.is_tree && tags.is_star && tags.is_complete);
        assert!(!tags.is_cycle);
    }

    #[test]
    fn classify_triangle_is_cycle_and_complete() {
        let g = cycle(3).unwrap();
        let tags = classify(&g);
        assert!(tags.is_cycle && tags.is_complete);
        assert!(!tags.is_tree);
    }

    #[test]
    fn classify_single_user() {
        let g = complete(1).unwrap();
        let tags = classify(&g);
        assert!(tags.is_complete && tags.is_tree && tags.is_star && tags.is_path);
        assert!(!tags.is_cycle);
    }

    #[test]
    fn star_center_and_orders() {
        assert_eq!(star_center(&star(6).unwrap()), Some(0));
        assert_eq!(star_center(&path(2).unwrap()), Some(0));
        assert_eq!(star_center(&cycle(4).unwrap()), None);

        let ring = cycle_order(&cycle(5).unwrap()).unwrap();
        assert_eq!(ring.len(), 5);
        assert_eq!(ring[0], 0);
        for k in 0..5 {
            let (a, b) = (ring[k], ring[(k + 1) % 5]);
            assert!(cycle(5).unwrap().has_edge(a, b));
        }

        // A path given in scrambled label order is still walked end to end.
        let g = InterferenceGraph::from_edges(4, &[(2, 0), (0, 3), (3, 1)]).unwrap();
        let order = path_order(&g).unwrap();
        assert_eq!(order, vec![1, 3, 0, 2]);
    }

    #[test]
    fn random_tree_is_tree_and_seed_deterministic() {
        for seed in 0..10 {
            let g = random_tree(9, seed).unwrap();
            assert!(classify(&g).is_tree);
            assert_eq!(g, random_tree(9, seed).unwrap());
        }
        // Different seeds eventually give different trees.
        assert_ne!(random_tree(9, 0).unwrap(), random_tree(9, 1).unwrap());
    }

    #[test]
    fn gnp_is_seed_deterministic() {
        let a = gnp_random(20, 0.5, 42).unwrap();
        let b = gnp_random(20, 0.5, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gnp_random(20, 0.5, 43).unwrap());
    }

    #[test]
    fn json_round_trip_preserves_graph() {
        let g = gnp_random(8, 0.6, 3).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        let back: InterferenceGraph = serde_json::from_str(&text).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn json_rejects_self_loop() {
        let err = serde_json::from_str::<InterferenceGraph>(
            r#"{"num_users": 3, "edges": [[1, 1]]}"#,
        );
        assert!(err.is_err());
    }
}
