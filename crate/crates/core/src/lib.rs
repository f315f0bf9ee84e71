//! Congestion games with resource reuse.
//!
//! Users sit on an interference graph and each picks one resource; a user's
//! payoff depends only on how many *closed neighbors* (itself included)
//! picked the same resource, through a non-increasing payoff table. The
//! crate builds such games, runs strict-improvement update dynamics over
//! them, and analyzes the results:
//!
//! * [`graph`] — undirected interference graphs, named topologies, random
//!   generators, and shape classification.
//! * [`game`] — payoff tables (shared or per-user), strategy profiles,
//!   perceived counts, deviations, and equilibrium checks, plus a JSON
//!   interchange format.
//! * [`dynamics`] — asynchronous better/best-response dynamics under
//!   round-robin, seeded-random, or scripted schedules; traces with strict
//!   validation, replay, and reverse-change diagnostics for two-resource
//!   runs.
//! * [`analysis`] — exhaustive equilibrium enumeration, termination
//!   checking over the full profile graph, and potential-function
//!   verification (exact on complete graphs, ordinal via monochromatic
//!   edge counts when all resources share one table).
//! * [`constructions`] — closed-form equilibria for complete graphs,
//!   trees, stars, cycles, paths, and dominating-resource games, plus a
//!   52-user three-resource instance whose strict-improvement dynamics
//!   loop forever.
//!
//! # Quick start
//!
//! Three users on a triangle share two resources. Best-response dynamics
//! from the all-on-0 profile must settle on an equilibrium, and exhaustive
//! enumeration must agree:
//!
//! ```
//! use cgrr::analysis::{enumerate_nash, DEFAULT_CAP};
//! use cgrr::dynamics::{run, MoveRule, Outcome, Scheduler};
//! use cgrr::{graph, Game, PayoffFamily, StrategyProfile};
//!
//! let game = Game::new(
//!     graph::complete(3)?,
//!     PayoffFamily::shared(vec![vec![5, 3, 1], vec![4, 2, 0]])?,
//! )?;
//! let start = StrategyProfile::uniform(3, 0);
//! let trace = run(&game, &start, &Scheduler::RoundRobin, MoveRule::BestResponse, 1000)?;
//! assert_eq!(trace.outcome, Outcome::ConvergedNe);
//! assert!(game.is_nash(&trace.terminal));
//! assert!(enumerate_nash(&game, DEFAULT_CAP)?.contains(&trace.terminal));
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod analysis;
pub mod constructions;
pub mod dynamics;
pub mod game;
pub mod graph;

pub use game::{Game, Payoff, PayoffFamily, StrategyProfile};
pub use graph::InterferenceGraph;
