//! Command-line front end for the congestion-game library: loads game
//! files, dispatches to the dynamics / analysis / construction routines,
//! and writes JSON reports (stdout) and JSON-lines traces (`--out`).
//!
//! Exit codes: 0 on success, 1 on domain errors (bad game files, violated
//! constructor preconditions) with a structured `{"error": ...}` message on
//! stderr, 2 on usage errors. All output is deterministic for fixed inputs
//! and seeds.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use cgrr::analysis::{self, FipVerdict, WitnessStep, DEFAULT_CAP};
use cgrr::constructions;
use cgrr::dynamics::{self, MoveRule, Outcome, Scheduler, Trace};
use cgrr::game::ImprovingMove;
use cgrr::{Game, StrategyProfile};

#[derive(Parser)]
#[command(
    name = "cgrr",
    version,
    about = "Construct, simulate, and analyze congestion games with resource reuse"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run asynchronous strict-improvement dynamics on a game
    Simulate(SimulateArgs),
    /// Check whether a profile is a Nash equilibrium
    CheckNe(CheckNeArgs),
    /// Exhaustively list all Nash equilibria of a small game
    EnumerateNe(EnumerateNeArgs),
    /// Decide the finite improvement property over the full profile space
    FipCheck(FipCheckArgs),
    /// Build a verified Nash equilibrium for a structured topology
    Construct(ConstructArgs),
    /// Emit the 52-user, 3-resource game whose scripted strict
    /// improvements return to their starting profile
    Counterexample(CounterexampleArgs),
    /// Validate a game file and summarize it
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchedulerArg {
    /// Users 0, 1, ..., N-1 in turn
    RoundRobin,
    /// Uniformly random user each step (requires --seed)
    Random,
    /// Exactly the users listed via --sequence, in order
    Sequence,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MoveRuleArg {
    /// Maximum-gain deviation, ties to the lowest resource index
    Best,
    /// Lowest-index strictly improving resource
    First,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TopologyArg {
    Complete,
    Tree,
    Star,
    Cycle,
    Path,
    Dominating,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Game description (JSON)
    #[arg(long, value_name = "PATH")]
    game: PathBuf,
    /// Starting profile: inline JSON array or @FILE; default all on resource 0
    #[arg(long, value_name = "JSON|@PATH")]
    initial: Option<String>,
    #[arg(long, value_enum, default_value = "round-robin")]
    scheduler: SchedulerArg,
    /// User order for --scheduler sequence, comma separated (e.g. 0,2,1)
    #[arg(long, value_delimiter = ',', value_name = "USERS")]
    sequence: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value = "best")]
    move_rule: MoveRuleArg,
    /// RNG seed; required for --scheduler random
    #[arg(long)]
    seed: Option<u64>,
    /// Budget of applied update events (skipped users are free)
    #[arg(long, default_value_t = 1_000_000)]
    max_steps: usize,
    /// Write the trace as JSON lines
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Append reverse-change diagnostics (needs at most two resources)
    #[arg(long)]
    diagnostics: bool,
}

#[derive(clap::Args)]
struct CheckNeArgs {
    #[arg(long, value_name = "PATH")]
    game: PathBuf,
    /// Profile to check: inline JSON array or @FILE
    #[arg(long, value_name = "JSON|@PATH")]
    profile: String,
}

#[derive(clap::Args)]
struct EnumerateNeArgs {
    #[arg(long, value_name = "PATH")]
    game: PathBuf,
    /// Refuse profile spaces larger than this many profiles
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u64,
    /// Split the enumeration across this many threads (same output)
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(clap::Args)]
struct FipCheckArgs {
    #[arg(long, value_name = "PATH")]
    game: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u64,
    /// Also run the exact/ordinal potential verifiers where applicable
    #[arg(long)]
    potentials: bool,
}

#[derive(clap::Args)]
struct ConstructArgs {
    #[arg(long, value_name = "PATH")]
    game: PathBuf,
    #[arg(long, value_enum)]
    topology: TopologyArg,
    /// Re-emit the loaded game (round-trips to an identical file)
    #[arg(long, value_name = "PATH")]
    emit_game: Option<PathBuf>,
}

#[derive(clap::Args)]
struct CounterexampleArgs {
    /// Write the scripted loop as a JSON-lines trace
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Write the gadget's game description (JSON)
    #[arg(long, value_name = "PATH")]
    emit_game: Option<PathBuf>,
    /// Write the full bundle: game, core users, initial profile, script, chain
    #[arg(long, value_name = "PATH")]
    emit_bundle: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ValidateArgs {
    #[arg(long, value_name = "PATH")]
    game: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", json!({ "error": format!("{err:#}") }));
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(args) => simulate(args),
        Command::CheckNe(args) => check_ne(args),
        Command::EnumerateNe(args) => enumerate_ne(args),
        Command::FipCheck(args) => fip_check(args),
        Command::Construct(args) => construct(args),
        Command::Counterexample(args) => counterexample(args),
        Command::Validate(args) => validate(args),
    }
}

fn load_game(path: &Path) -> Result<Game> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading game file {}", path.display()))?;
    Game::from_json(&text).with_context(|| format!("invalid game file {}", path.display()))
}

/// Accepts an inline JSON array, an inline `{"profile": [...]}` object, or
/// `@path` pointing at a file holding either shape.
fn parse_profile_arg(raw: &str) -> Result<StrategyProfile> {
    let text = match raw.strip_prefix('@') {
        Some(path) => fs::read_to_string(path)
            .with_context(|| format!("reading profile file {path}"))?,
        None => raw.to_string(),
    };
    let value: serde_json::Value =
        serde_json::from_str(text.trim()).context("profile is not valid JSON")?;
    let array = match &value {
        serde_json::Value::Array(_) => value.clone(),
        serde_json::Value::Object(map) => map
            .get("profile")
            .cloned()
            .context("profile object has no \"profile\" field")?,
        _ => bail!("profile must be a JSON array or an object with a \"profile\" array"),
    };
    let choices: Vec<usize> =
        serde_json::from_value(array).context("profile entries must be non-negative integers")?;
    Ok(StrategyProfile::new(choices))
}

/// Missing flag combinations are usage errors (exit 2), same as clap's own.
fn require_flag<T>(value: Option<T>, message: &str) -> T {
    match value {
        Some(v) => v,
        None => Cli::command()
            .error(clap::error::ErrorKind::MissingRequiredArgument, message)
            .exit(),
    }
}

fn write_trace(path: &Path, trace: &Trace) -> Result<()> {
    let file = fs::File::create(path)
        .with_context(|| format!("creating trace file {}", path.display()))?;
    let mut out = std::io::BufWriter::new(file);
    trace
        .write_jsonl(&mut out)
        .and_then(|()| out.flush())
        .with_context(|| format!("writing trace to {}", path.display()))
}

fn print_report<T: Serialize>(report: &T) {
    println!("{}", serde_json::to_string_pretty(report).expect("reports serialize"));
}

#[derive(Serialize)]
struct ReverseChangeJson {
    holds: bool,
    pairs_checked: usize,
    violations: Vec<dynamics::ReverseChangeViolation>,
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    outcome: Outcome,
    events: usize,
    initial: &'a StrategyProfile,
    terminal: &'a StrategyProfile,
    terminal_is_nash: bool,
    scheduler: &'a str,
    move_rule: MoveRule,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    max_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reverse_change: Option<ReverseChangeJson>,
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let game = load_game(&args.game)?;
    let initial = match &args.initial {
        Some(raw) => parse_profile_arg(raw)?,
        None => StrategyProfile::uniform(game.num_users(), 0),
    };
    let (scheduler, scheduler_name) = match args.scheduler {
        SchedulerArg::RoundRobin => (Scheduler::RoundRobin, "round-robin"),
        SchedulerArg::Random => {
            let seed = require_flag(args.seed, "--seed is required for --scheduler random");
            (Scheduler::UniformRandom { seed }, "random")
        }
        SchedulerArg::Sequence => {
            let order = require_flag(
                args.sequence.clone(),
                "--sequence is required for --scheduler sequence",
            );
            (Scheduler::FixedSequence(order), "sequence")
        }
    };
    let rule = match args.move_rule {
        MoveRuleArg::Best => MoveRule::BestResponse,
        MoveRuleArg::First => MoveRule::FirstImproving,
    };
    let trace = dynamics::run(&game, &initial, &scheduler, rule, args.max_steps)
        .context("dynamics run failed")?;
    if let Some(path) = &args.out {
        write_trace(path, &trace)?;
    }
    let reverse_change = if args.diagnostics {
        let report = dynamics::check_reverse_change_inequality(&game, &trace)
            .context("reverse-change diagnostics failed")?;
        Some(ReverseChangeJson {
            holds: report.holds(),
            pairs_checked: report.pairs_checked,
            violations: report.violations,
        })
    } else {
        None
    };
    print_report(&SimulateReport {
        outcome: trace.outcome,
        events: trace.events.len(),
        initial: &trace.initial,
        terminal: &trace.terminal,
        terminal_is_nash: game.is_nash(&trace.terminal),
        scheduler: scheduler_name,
        move_rule: rule,
        seed: args.seed,
        max_steps: args.max_steps,
        trace_path: args.out.as_ref().map(|p| p.display().to_string()),
        reverse_change,
    });
    Ok(())
}

#[derive(Serialize)]
struct CheckNeReport<'a> {
    is_nash: bool,
    profile: &'a StrategyProfile,
    /// A strictly improving deviation when the profile is not an
    /// equilibrium.
    witness: Option<ImprovingMove>,
}

fn check_ne(args: CheckNeArgs) -> Result<()> {
    let game = load_game(&args.game)?;
    let profile = parse_profile_arg(&args.profile)?;
    game.validate_profile(&profile).context("profile does not fit the game")?;
    let witness = game.find_improving_move(&profile);
    print_report(&CheckNeReport { is_nash: witness.is_none(), profile: &profile, witness });
    Ok(())
}

#[derive(Serialize)]
struct FipJson {
    holds: bool,
    witness: Option<Vec<WitnessStep>>,
}

impl From<FipVerdict> for FipJson {
    fn from(v: FipVerdict) -> Self {
        FipJson { holds: v.holds, witness: v.witness_cycle }
    }
}

#[derive(Serialize)]
struct PotentialCheckJson {
    applicable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    holds: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<serde_json::Value>,
}

#[derive(Serialize)]
struct PotentialChecksJson {
    /// Congestion potential with exact integer increments; applies to
    /// complete graphs with shared tables.
    exact: PotentialCheckJson,
    /// Monochromatic-edge potential; applies when every resource has the
    /// same table.
    ordinal: PotentialCheckJson,
}

/// Combined analysis report; subcommands fill in the parts they computed.
#[derive(Serialize)]
struct AnalysisReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    nash_profiles: Option<Vec<StrategyProfile>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fip: Option<FipJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    potential_checks: Option<PotentialChecksJson>,
}

fn enumerate_ne(args: EnumerateNeArgs) -> Result<()> {
    let game = load_game(&args.game)?;
    let workers = args.workers.max(1);
    let profiles = analysis::enumerate_nash_partitioned(&game, args.cap, workers)
        .context("enumeration failed")?;
    print_report(&AnalysisReport {
        count: Some(profiles.len()),
        nash_profiles: Some(profiles),
        fip: None,
        potential_checks: None,
    });
    Ok(())
}

fn potential_check_json<T: Serialize>(
    result: Result<T, analysis::AnalysisError>,
    holds_of: impl Fn(&T) -> bool,
) -> PotentialCheckJson {
    match result {
        Ok(report) => PotentialCheckJson {
            applicable: true,
            reason: None,
            holds: Some(holds_of(&report)),
            detail: Some(serde_json::to_value(&report).expect("reports serialize")),
        },
        Err(err) => PotentialCheckJson {
            applicable: false,
            reason: Some(err.to_string()),
            holds: None,
            detail: None,
        },
    }
}

fn fip_check(args: FipCheckArgs) -> Result<()> {
    let game = load_game(&args.game)?;
    let verdict = analysis::fip_check(&game, args.cap).context("improvement-graph scan failed")?;
    let potential_checks = args.potentials.then(|| PotentialChecksJson {
        exact: potential_check_json(analysis::verify_exact_potential(&game, args.cap), |r| r.holds),
        ordinal: potential_check_json(analysis::verify_ordinal_potential(&game, args.cap), |r| {
            r.holds
        }),
    });
    print_report(&AnalysisReport {
        nash_profiles: None,
        count: None,
        fip: Some(verdict.into()),
        potential_checks,
    });
    Ok(())
}

#[derive(Serialize)]
struct VerificationStanza {
    is_nash: bool,
    users: usize,
    resources: usize,
}

#[derive(Serialize)]
struct ConstructReport<'a> {
    topology: &'a str,
    profile: &'a StrategyProfile,
    verification: VerificationStanza,
}

fn construct(args: ConstructArgs) -> Result<()> {
    let game = load_game(&args.game)?;
    let (name, result) = match args.topology {
        TopologyArg::Complete => ("complete", constructions::construct_ne_complete(&game)),
        TopologyArg::Tree => ("tree", constructions::construct_ne_tree(&game)),
        TopologyArg::Star => ("star", constructions::construct_ne_star(&game)),
        TopologyArg::Cycle => ("cycle", constructions::construct_ne_cycle(&game)),
        TopologyArg::Path => ("path", constructions::construct_ne_path(&game)),
        TopologyArg::Dominating => ("dominating", constructions::construct_ne_dominating(&game)),
    };
    let profile = result.with_context(|| format!("{name} construction failed"))?;
    if let Some(path) = &args.emit_game {
        fs::write(path, game.to_json())
            .with_context(|| format!("writing game to {}", path.display()))?;
    }
    print_report(&ConstructReport {
        topology: name,
        profile: &profile,
        verification: VerificationStanza {
            is_nash: game.is_nash(&profile),
            users: game.num_users(),
            resources: game.num_resources(),
        },
    });
    Ok(())
}

fn counterexample(args: CounterexampleArgs) -> Result<()> {
    let bundle = constructions::build_counterexample();
    let trace =
        constructions::replay_counterexample(&bundle).context("replaying the scripted loop")?;
    if let Some(path) = &args.out {
        write_trace(path, &trace)?;
    }
    if let Some(path) = &args.emit_game {
        fs::write(path, bundle.game.to_json())
            .with_context(|| format!("writing game to {}", path.display()))?;
    }
    if let Some(path) = &args.emit_bundle {
        let game_json: serde_json::Value =
            serde_json::from_str(&bundle.game.to_json()).expect("emitted game JSON parses");
        let bundle_json = json!({
            "game": game_json,
            "core": bundle.core,
            "initial": bundle.initial,
            "script": bundle.script,
            "chain": bundle.chain,
        });
        fs::write(path, serde_json::to_string_pretty(&bundle_json).expect("bundle serializes"))
            .with_context(|| format!("writing bundle to {}", path.display()))?;
    }
    let report = json!({
        "users": bundle.game.num_users(),
        "resources": bundle.game.num_resources(),
        "core": bundle.core,
        "chain_terms": bundle.chain.len(),
        "events": trace.events.len(),
        "outcome": trace.outcome,
        "terminal_equals_initial": trace.terminal == bundle.initial,
        "trace_path": args.out.as_ref().map(|p| p.display().to_string()),
    });
    print_report(&report);
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<()> {
    let game = load_game(&args.game)?;
    let mode = match game.payoffs() {
        cgrr::PayoffFamily::Shared(_) => "shared",
        cgrr::PayoffFamily::PerUser(_) => "per_user",
    };
    print_report(&json!({
        "valid": true,
        "num_users": game.num_users(),
        "num_resources": game.num_resources(),
        "num_edges": game.graph().num_edges(),
        "payoff_mode": mode,
    }));
    Ok(())
}
