//! Asynchronous strict-improvement dynamics.
//!
//! One user updates at a time, and an update is only taken when it strictly
//! increases that user's payoff. Weak (zero-gain) moves are never applied:
//! allowing them would let a user oscillate between equally good resources
//! and turn every convergence question degenerate.
//!
//! A [`Trace`] records a run: the initial profile, the ordered update
//! events (1-indexed times), the terminal profile, and how the run ended.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::game::{Game, Payoff, StrategyProfile};

/// How the next user to examine is chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scheduler {
    /// Users `0, 1, ..., N-1, 0, ...` in turn.
    RoundRobin,
    /// Users drawn uniformly at random, deterministic in the seed.
    UniformRandom { seed: u64 },
    /// Exactly the listed users, in order. Every listed user must have a
    /// strictly improving move when its turn comes.
    FixedSequence(Vec<usize>),
}

/// Which improving deviation the scheduled user takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveRule {
    /// Maximum-gain deviation, ties to the lowest resource index.
    BestResponse,
    /// Lowest-index resource with positive gain.
    FirstImproving,
}

/// One applied update: user `mover` switched `from -> to` at time `t`,
/// strictly raising its payoff from `old_payoff` to `new_payoff`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateEvent {
    pub t: usize,
    pub mover: usize,
    pub from: usize,
    pub to: usize,
    pub old_payoff: Payoff,
    pub new_payoff: Payoff,
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// No user can strictly improve: the terminal profile is a Nash
    /// equilibrium.
    ConvergedNe,
    /// The step budget (or a replayed script) ran out before reaching an
    /// equilibrium.
    StepLimit,
    /// The trace returned to its initial profile after at least one event.
    CycleDetected,
}

/// A complete record of one dynamics run or replayed script.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub initial: StrategyProfile,
    pub events: Vec<UpdateEvent>,
    pub terminal: StrategyProfile,
    pub outcome: Outcome,
}

impl Trace {
    /// True when the trace forms a loop in profile space.
    pub fn is_loop(&self) -> bool {
        !self.events.is_empty() && self.initial == self.terminal
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Game(#[from] crate::game::GameError),
    #[error("scheduled user {user} is out of range 0..{num_users}")]
    UserOutOfRange { user: usize, num_users: usize },
    #[error(
        "fixed sequence is not an improvement path: step {step} names user {user}, which has no strictly improving move"
    )]
    SequenceNotImproving { step: usize, user: usize },
    #[error(
        "step {step}: move of user {user} to resource {to} does not strictly improve (payoff {old_payoff} -> {new_payoff})"
    )]
    NotImproving { step: usize, user: usize, to: usize, old_payoff: Payoff, new_payoff: Payoff },
    #[error("replay move {step} targets resource {to}, but game has {num_resources} resources")]
    MoveOutOfRange { step: usize, to: usize, num_resources: usize },
    #[error(
        "reverse-change diagnostics apply to games with at most two resources, this game has {num_resources}"
    )]
    UnsupportedDiagnostic { num_resources: usize },
}

fn pick_move(game: &Game, profile: &StrategyProfile, user: usize, rule: MoveRule) -> Option<crate::game::Deviation> {
    match rule {
        MoveRule::BestResponse => game.best_deviation(profile, user),
        MoveRule::FirstImproving => game.first_improving_deviation(profile, user),
    }
}

/// After this many consecutive skipped draws the random scheduler runs a
/// full scan to decide convergence. The scan is authoritative; the skip
/// count is only a cheap trigger.
const RANDOM_SKIP_FACTOR: usize = 32;

/// Runs improvement dynamics from `initial` until no user can improve
/// (`ConvergedNe`), the event budget `max_steps` is exhausted
/// (`StepLimit`), or a fixed sequence ends. With identical inputs — game,
/// initial profile, scheduler (including seed), move rule — the trace is
/// reproduced exactly.
///
/// `max_steps` bounds *applied events*, not scheduler draws; skipped users
/// (no improving move) cost nothing.
pub fn run(
    game: &Game,
    initial: &StrategyProfile,
    scheduler: &Scheduler,
    rule: MoveRule,
    max_steps: usize,
) -> Result<Trace, DynamicsError> {
    game.validate_profile(initial)?;
    let n = game.num_users();
    let mut profile = initial.clone();
    let mut events = Vec::new();

    let apply = |profile: &mut StrategyProfile,
                     events: &mut Vec<UpdateEvent>,
                     user: usize,
                     d: crate::game::Deviation| {
        let old_payoff = game.payoff(profile, user);
        let from = profile.resource_of(user);
        profile.set(user, d.resource);
        let new_payoff = game.payoff(profile, user);
        debug_assert_eq!(new_payoff - old_payoff, d.gain);
        events.push(UpdateEvent {
            t: events.len() + 1,
            mover: user,
            from,
            to: d.resource,
            old_payoff,
            new_payoff,
        });
    };

    let outcome = match scheduler {
        Scheduler::RoundRobin => {
            let mut user = 0;
            let mut idle_streak = 0;
            loop {
                match pick_move(game, &profile, user, rule) {
                    Some(d) => {
                        if events.len() == max_steps {
                            break Outcome::StepLimit;
                        }
                        apply(&mut profile, &mut events, user, d);
                        idle_streak = 0;
                    }
                    None => {
                        idle_streak += 1;
                        if idle_streak == n {
                            break Outcome::ConvergedNe;
                        }
                    }
                }
                user = (user + 1) % n;
            }
        }
        Scheduler::UniformRandom { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut skips = 0;
            loop {
                let user = rng.random_range(0..n);
                match pick_move(game, &profile, user, rule) {
                    Some(d) => {
                        if events.len() == max_steps {
                            break Outcome::StepLimit;
                        }
                        apply(&mut profile, &mut events, user, d);
                        skips = 0;
                    }
                    None => {
                        skips += 1;
                        if skips >= n * RANDOM_SKIP_FACTOR {
                            if game.is_nash(&profile) {
                                break Outcome::ConvergedNe;
                            }
                            skips = 0;
                        }
                    }
                }
            }
        }
        Scheduler::FixedSequence(sequence) => {
            let mut limited = false;
            for (k, &user) in sequence.iter().enumerate() {
                if user >= n {
                    return Err(DynamicsError::UserOutOfRange { user, num_users: n });
                }
                let d = pick_move(game, &profile, user, rule)
                    .ok_or(DynamicsError::SequenceNotImproving { step: k + 1, user })?;
                if events.len() == max_steps {
                    limited = true;
                    break;
                }
                apply(&mut profile, &mut events, user, d);
            }
            if limited {
                Outcome::StepLimit
            } else if !events.is_empty() && profile == *initial {
                Outcome::CycleDetected
            } else if game.is_nash(&profile) {
                Outcome::ConvergedNe
            } else {
                Outcome::StepLimit
            }
        }
    };

    Ok(Trace { initial: initial.clone(), events, terminal: profile, outcome })
}

/// Replays an explicit script of `(user, resource)` moves, validating that
/// every move is a strict improvement. The first non-improving move aborts
/// with a [`DynamicsError::NotImproving`] report carrying the step, user,
/// and both payoffs.
///
/// Outcome: `CycleDetected` when the script returns to the initial profile
/// after at least one event; otherwise `ConvergedNe` when the final profile
/// is an equilibrium; otherwise `StepLimit` (script ended mid-path).
pub fn replay(
    game: &Game,
    initial: &StrategyProfile,
    moves: &[(usize, usize)],
) -> Result<Trace, DynamicsError> {
    game.validate_profile(initial)?;
    let n = game.num_users();
    let mut profile = initial.clone();
    let mut events = Vec::new();
    for (k, &(user, to)) in moves.iter().enumerate() {
        let step = k + 1;
        if user >= n {
            return Err(DynamicsError::UserOutOfRange { user, num_users: n });
        }
        if to >= game.num_resources() {
            return Err(DynamicsError::MoveOutOfRange {
                step,
                to,
                num_resources: game.num_resources(),
            });
        }
        let from = profile.resource_of(user);
        let old_payoff = game.payoff(&profile, user);
        if from == to {
            return Err(DynamicsError::NotImproving {
                step,
                user,
                to,
                old_payoff,
                new_payoff: old_payoff,
            });
        }
        let mut next = profile.clone();
        next.set(user, to);
        let new_payoff = game.payoff(&next, user);
        if new_payoff <= old_payoff {
            return Err(DynamicsError::NotImproving { step, user, to, old_payoff, new_payoff });
        }
        profile = next;
        events.push(UpdateEvent { t: step, mover: user, from, to, old_payoff, new_payoff });
    }
    let outcome = if !events.is_empty() && profile == *initial {
        Outcome::CycleDetected
    } else if game.is_nash(&profile) {
        Outcome::ConvergedNe
    } else {
        Outcome::StepLimit
    };
    Ok(Trace { initial: initial.clone(), events, terminal: profile, outcome })
}

// ---------------------------------------------------------------------------
// Reverse-change diagnostics (two-resource games)
// ---------------------------------------------------------------------------

/// A user's pair of opposite switches — `s -> s̄` at `t`, then `s̄ -> s` at
/// `t_prime` — with the mover's neighbors partitioned by the colors they
/// held at the two change instants (just before each switch).
///
/// With two resources every pair of consecutive changes by one user is such
/// a reverse pair. Set names read "(at first change, at second change)":
/// `ss` holds neighbors that matched the mover both times, `oo` neighbors
/// that opposed both times, `so` and `os` the mixed cases. The four sets
/// partition the mover's neighborhood (mover excluded).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReverseChangePair {
    pub mover: usize,
    pub t: usize,
    pub t_prime: usize,
    pub ss: Vec<usize>,
    pub oo: Vec<usize>,
    pub so: Vec<usize>,
    pub os: Vec<usize>,
}

/// Extracts every reverse-change pair from a two-resource trace.
///
/// Within the trace, each user's consecutive changes are paired. When the
/// trace is a loop the changes wrap around: the last change also pairs with
/// the first, closing the circle. Games with three or more resources are
/// rejected — consecutive changes need not be reverses there, so the
/// partition below loses its meaning.
pub fn reverse_change_pairs(
    game: &Game,
    trace: &Trace,
) -> Result<Vec<ReverseChangePair>, DynamicsError> {
    if game.num_resources() > 2 {
        return Err(DynamicsError::UnsupportedDiagnostic { num_resources: game.num_resources() });
    }

    // Profile just before each event, in event order.
    let mut pre_states = Vec::with_capacity(trace.events.len());
    let mut state = trace.initial.clone();
    for e in &trace.events {
        pre_states.push(state.clone());
        debug_assert_eq!(state.resource_of(e.mover), e.from);
        state.set(e.mover, e.to);
    }

    let mut change_times: HashMap<usize, Vec<usize>> = HashMap::new();
    for e in &trace.events {
        change_times.entry(e.mover).or_default().push(e.t);
    }

    let mut movers: Vec<usize> = change_times.keys().copied().collect();
    movers.sort_unstable();

    let mut pairs = Vec::new();
    for mover in movers {
        let times = &change_times[&mover];
        let mut index_pairs: Vec<(usize, usize)> =
            times.windows(2).map(|w| (w[0], w[1])).collect();
        if trace.is_loop() && times.len() >= 2 {
            index_pairs.push((times[times.len() - 1], times[0]));
        }
        for (t, t_prime) in index_pairs {
            let at_t = &pre_states[t - 1];
            let at_t_prime = &pre_states[t_prime - 1];
            let s = at_t.resource_of(mover);
            let s_bar = at_t_prime.resource_of(mover);
            debug_assert_ne!(s, s_bar, "consecutive two-resource changes must reverse");
            let mut pair = ReverseChangePair {
                mover,
                t,
                t_prime,
                ss: Vec::new(),
                oo: Vec::new(),
                so: Vec::new(),
                os: Vec::new(),
            };
            for &j in game.graph().neighbors(mover) {
                let first_same = at_t.resource_of(j) == s;
                let second_same = at_t_prime.resource_of(j) == s_bar;
                match (first_same, second_same) {
                    (true, true) => pair.ss.push(j),
                    (false, false) => pair.oo.push(j),
                    (true, false) => pair.so.push(j),
                    (false, true) => pair.os.push(j),
                }
            }
            pairs.push(pair);
        }
    }
    Ok(pairs)
}

/// A reverse-change pair whose neighbor counts contradict strict
/// improvement: on a valid improvement path, strictly more neighbors must
/// match the mover at both change instants than oppose it at both.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReverseChangeViolation {
    pub mover: usize,
    pub t: usize,
    pub t_prime: usize,
    pub ss_size: usize,
    pub oo_size: usize,
}

/// Outcome of checking `|ss| > |oo|` over every reverse-change pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReverseChangeReport {
    pub pairs_checked: usize,
    pub violations: Vec<ReverseChangeViolation>,
}

impl ReverseChangeReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the reverse-change inequality `|ss| > |oo|` on every pair of a
/// two-resource trace. Strict-improvement traces always satisfy it; a
/// violation means the trace was not generated by strict improvements.
pub fn check_reverse_change_inequality(
    game: &Game,
    trace: &Trace,
) -> Result<ReverseChangeReport, DynamicsError> {
    let pairs = reverse_change_pairs(game, trace)?;
    let mut report = ReverseChangeReport { pairs_checked: pairs.len(), violations: Vec::new() };
    for p in &pairs {
        if p.ss.len() <= p.oo.len() {
            report.violations.push(ReverseChangeViolation {
                mover: p.mover,
                t: p.t,
                t_prime: p.t_prime,
                ss_size: p.ss.len(),
                oo_size: p.oo.len(),
            });
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Trace serialization (JSON lines)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TraceHeader {
    initial: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct TraceFooter {
    terminal: Vec<usize>,
    outcome: Outcome,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("trace line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("trace is missing its {0} line")]
    Missing(&'static str),
    #[error("unexpected content after the trace footer on line {line}")]
    TrailingContent { line: usize },
}

impl Trace {
    /// Writes the trace as JSON lines: a header with the initial profile,
    /// one line per event, and a footer with the terminal profile and
    /// outcome. The encoding is canonical — identical traces always produce
    /// identical bytes.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header = TraceHeader { initial: self.initial.choices().to_vec() };
        writeln!(out, "{}", serde_json::to_string(&header)?)?;
        for e in &self.events {
            writeln!(out, "{}", serde_json::to_string(e)?)?;
        }
        let footer =
            TraceFooter { terminal: self.terminal.choices().to_vec(), outcome: self.outcome };
        writeln!(out, "{}", serde_json::to_string(&footer)?)?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json produces UTF-8")
    }

    /// Parses a trace previously written by [`Trace::write_jsonl`].
    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self, TraceIoError> {
        let mut lines = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if !line.trim().is_empty() {
                lines.push((idx + 1, line));
            }
        }
        let mut it = lines.into_iter();
        let (line_no, header_line) = it.next().ok_or(TraceIoError::Missing("header"))?;
        let header: TraceHeader = serde_json::from_str(&header_line)
            .map_err(|source| TraceIoError::Json { line: line_no, source })?;
        let mut events = Vec::new();
        let mut footer: Option<TraceFooter> = None;
        for (line_no, line) in it {
            if footer.is_some() {
                return Err(TraceIoError::TrailingContent { line: line_no });
            }
            match serde_json::from_str::<UpdateEvent>(&line) {
                Ok(e) => events.push(e),
                Err(_) => {
                    footer = Some(
                        serde_json::from_str(&line)
                            .map_err(|source| TraceIoError::Json { line: line_no, source })?,
                    );
                }
            }
        }
        let footer = footer.ok_or(TraceIoError::Missing("footer"))?;
        Ok(Trace {
            initial: StrategyProfile::new(header.initial),
            events,
            terminal: StrategyProfile::new(footer.terminal),
            outcome: footer.outcome,
        })
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TraceIoError> {
        Self::read_jsonl(text.as_bytes())
    }
}
