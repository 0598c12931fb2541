//! Experiment plans, game play and the resumable parallel runner.

mod agents;
pub mod checkpoint;
mod plan;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use rayon::prelude::*;
use thiserror::Error;

pub use checkpoint::Manifest;
pub use plan::{
    Cell, ExperimentPlan, LoadedPlan, PlayerConfig, DEFAULT_ITERATIONS_AGENT_OPPONENT,
    DEFAULT_ITERATIONS_RULE_OPPONENT,
};

use crate::game::{
    Action, Counterpart, Decision, DecisionSource, GameError, GameState, GameStatus, GameTranscript, Perspective,
    SetupKind,
};
use crate::gateway::{ChatBackend, GatewayError, Stage, TransportError};
use crate::seed::derive_seed;
use crate::strategies::{declare_intent, respond, rule_decide, OpponentSpec, StrategyState};
use crate::templates::TemplateSet;
use agents::{Player, Table, Turn, TurnError};

pub const DEFAULT_WORKERS: usize = 4;

/// Separates the declare-stage and act-stage outputs in Setup 3 reasoning.
pub const STAGE_SEPARATOR: &str = "\n\n-----\n\n";

#[derive(Debug, Error)]
pub enum TournamentError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("the plan uses model-backed players but no sidecar backend was configured")]
    NoBackend,
    #[error("{game_id}: {source}")]
    Gateway {
        game_id: String,
        #[source]
        source: GatewayError,
    },
    #[error("output directory belongs to plan {expected}, not {found}")]
    PlanMismatch { expected: String, found: String },
    #[error("{}: {message}", path.display())]
    Corrupt { path: PathBuf, message: String },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

impl TournamentError {
    /// True when the run stopped because the sidecar could not be reached.
    pub fn is_sidecar_unavailable(&self) -> bool {
        matches!(
            self,
            TournamentError::Gateway {
                source: GatewayError::SidecarUnavailable(_),
                ..
            }
        )
    }
}

/// Everything a run needs besides the plan itself. None of it affects the
/// plan fingerprint.
#[derive(Clone)]
pub struct Runtime {
    pub backend: Option<Arc<dyn ChatBackend>>,
    pub endpoint: String,
    pub templates: TemplateSet,
    pub retry_backoff_ms: u64,
}

impl Runtime {
    /// For plans without model-backed players.
    pub fn offline() -> Self {
        Self {
            backend: None,
            endpoint: String::new(),
            templates: TemplateSet::builtin(),
            retry_backoff_ms: 0,
        }
    }

    pub fn with_backend(backend: Arc<dyn ChatBackend>, endpoint: impl Into<String>) -> Self {
        Self {
            backend: Some(backend),
            endpoint: endpoint.into(),
            templates: TemplateSet::builtin(),
            retry_backoff_ms: 500,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub workers: usize,
    /// Play at most this many new games, then stop (the run stays resumable).
    pub stop_after: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: DEFAULT_WORKERS,
            stop_after: None,
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    /// Every finished game on disk, ordered by (cell, iteration).
    pub transcripts: Vec<GameTranscript>,
    pub played: usize,
    pub reused: usize,
    pub planned: usize,
    pub fingerprint: String,
}

impl RunOutcome {
    pub fn is_complete(&self) -> bool {
        self.transcripts.len() == self.planned
    }

    pub fn n_invalid(&self) -> usize {
        self.transcripts.iter().filter(|t| !t.is_valid()).count()
    }
}

pub fn game_id(setup: SetupKind, cell: u32, iteration: u32) -> String {
    format!("{}-c{cell:04}-i{iteration:04}", setup.key())
}

fn rule_decision(spec: &OpponentSpec, action: Action) -> Decision {
    Decision {
        action,
        message: None,
        reasoning: String::new(),
        source: DecisionSource::Rule { strategy: spec.label() },
    }
}

fn into_decision(turn: Turn, message: Option<Action>, reasoning: String) -> Decision {
    Decision {
        action: turn.action.expect("action stage yields an action"),
        message,
        reasoning,
        source: turn.source,
    }
}

fn join_reasoning(declare: String, act: String) -> String {
    if declare.is_empty() && act.is_empty() {
        String::new()
    } else {
        format!("{declare}{STAGE_SEPARATOR}{act}")
    }
}

fn bind(plan: &ExperimentPlan, cell: &Cell, runtime: &Runtime) -> (Player, Option<Player>) {
    let a = Player {
        binding: plan.player_a.bind(&cell.condition_a, &runtime.endpoint, runtime.retry_backoff_ms),
        role: Perspective::A,
    };
    let b = match (&cell.counterpart, &plan.player_b) {
        (Counterpart::Agent { condition }, Some(cfg)) => Some(Player {
            binding: cfg.bind(condition, &runtime.endpoint, runtime.retry_backoff_ms),
            role: Perspective::B,
        }),
        _ => None,
    };
    (a, b)
}

/// Plays one game to completion. A player that cannot produce a usable turn
/// ends the game early with an invalid status; sidecar failures abort.
pub fn play_game(
    plan: &ExperimentPlan,
    cell: &Cell,
    iteration: u32,
    runtime: &Runtime,
) -> Result<GameTranscript, TournamentError> {
    let seed = derive_seed(plan.master_seed, cell.index.into(), iteration.into());
    let id = game_id(plan.setup, cell.index, iteration);
    let (a, b) = bind(plan, cell, runtime);
    let table = Table {
        setup: plan.setup,
        matrix: &plan.payoff,
        rounds_total: plan.rounds_per_game,
        game_seed: seed,
        templates: &runtime.templates,
        backend: runtime.backend.as_deref(),
    };
    let mut state = GameState::new(plan.setup, plan.payoff, plan.rounds_per_game);
    let mut rule_state = StrategyState::new(seed);

    let mut status = GameStatus::Valid;
    while !state.is_complete() {
        let round = state.next_round();
        match play_round(&table, &mut state, &mut rule_state, cell, &a, b.as_ref()) {
            Ok(()) => {}
            Err(TurnError::Invalidates(reason)) => {
                warn!("{id}: round {round}: {reason}");
                status = GameStatus::Invalid {
                    reason: format!("round {round}: {reason}"),
                };
                break;
            }
            Err(TurnError::Fatal(source)) => return Err(TournamentError::Gateway { game_id: id, source }),
        }
    }

    Ok(GameTranscript {
        game_id: id,
        setup_kind: plan.setup,
        condition_a: cell.condition_a.clone(),
        condition_b: cell.counterpart.clone(),
        cell_index: cell.index,
        iteration,
        seed,
        rounds_per_game: plan.rounds_per_game,
        status,
        rounds: state.into_rounds(),
    })
}

fn play_round(
    table: &Table<'_>,
    state: &mut GameState,
    rule_state: &mut StrategyState,
    cell: &Cell,
    a: &Player,
    b: Option<&Player>,
) -> Result<(), TurnError> {
    let record = |state: &mut GameState, da, db, intent| {
        state
            .play_round(da, db, intent)
            .map(|_| ())
            .map_err(|e: GameError| TurnError::Invalidates(e.to_string()))
    };
    match (table.setup, &cell.counterpart) {
        (SetupKind::Setup1, Counterpart::Rule { spec }) => {
            let turn = a.turn(table, Stage::Decide, state.rounds(), None, None)?;
            let b_action = rule_decide(spec, rule_state, state.rounds())?;
            let raw = turn.raw.clone();
            record(state, into_decision(turn, None, raw), rule_decision(spec, b_action), None)
        }
        (SetupKind::Setup2, Counterpart::Rule { spec }) => {
            let intent = declare_intent(rule_state);
            let turn = a.turn(table, Stage::Decide, state.rounds(), Some(intent), None)?;
            let message = turn.message.expect("setup 2 decide yields a message");
            let b_action = respond(spec, rule_state, message)?;
            let raw = turn.raw.clone();
            record(
                state,
                into_decision(turn, Some(message), raw),
                rule_decision(spec, b_action),
                Some(intent),
            )
        }
        (SetupKind::Setup3, Counterpart::Agent { .. }) => {
            let b = b.expect("setup 3 cells bind player B");
            // both messages are fixed before either player hears the other
            let da = a.turn(table, Stage::Declare, state.rounds(), None, None)?;
            let db = b.turn(table, Stage::Declare, state.rounds(), None, None)?;
            let ma = da.message.expect("declare yields a message");
            let mb = db.message.expect("declare yields a message");
            let ta = a.turn(table, Stage::Act, state.rounds(), Some(mb), Some(ma))?;
            let tb = b.turn(table, Stage::Act, state.rounds(), Some(ma), Some(mb))?;
            let (ra, rb) = (join_reasoning(da.raw, ta.raw.clone()), join_reasoning(db.raw, tb.raw.clone()));
            let (ta, tb) = (merge_retries(ta, &da.source), merge_retries(tb, &db.source));
            record(state, into_decision(ta, Some(ma), ra), into_decision(tb, Some(mb), rb), None)
        }
        (setup, counterpart) => Err(TurnError::Invalidates(format!(
            "{setup} cannot be played against {}",
            counterpart.label()
        ))),
    }
}

/// Adds the declare-stage retries to the act-stage source.
fn merge_retries(mut turn: Turn, declare: &DecisionSource) -> Turn {
    if let (DecisionSource::Model { retries, .. }, DecisionSource::Model { retries: earlier, .. }) =
        (&mut turn.source, declare)
    {
        *retries += earlier;
    }
    turn
}

fn check_ready(plan: &ExperimentPlan, runtime: &Runtime) -> Result<(), TournamentError> {
    plan.validate()?;
    if plan.uses_llm() && runtime.backend.is_none() {
        return Err(TournamentError::NoBackend);
    }
    Ok(())
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, TournamentError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| TournamentError::Pool(e.to_string()))
}

fn all_keys(plan: &ExperimentPlan) -> Vec<(Cell, u32)> {
    plan.cells()
        .into_iter()
        .flat_map(|c| (0..plan.iterations_per_cell).map(move |i| (c.clone(), i)))
        .collect()
}

/// Plays every game of `plan` in memory, ordered by (cell, iteration).
pub fn run_games(plan: &ExperimentPlan, runtime: &Runtime, workers: usize) -> Result<Vec<GameTranscript>, TournamentError> {
    check_ready(plan, runtime)?;
    let keys = all_keys(plan);
    pool(workers)?.install(|| {
        keys.par_iter()
            .map(|(cell, i)| play_game(plan, cell, *i, runtime))
            .collect()
    })
}

/// Plays the games of `plan` not yet checkpointed under `out_dir`.
///
/// Each finished game is written on its own, so an interrupted run resumes
/// where it stopped. Once every game is present the transcript record file
/// is (re)written.
pub fn run_plan(
    plan: &ExperimentPlan,
    runtime: &Runtime,
    out_dir: &Path,
    options: RunOptions,
) -> Result<RunOutcome, TournamentError> {
    check_ready(plan, runtime)?;
    let manifest = checkpoint::open_run_dir(out_dir, plan)?;
    let done = checkpoint::load_games(out_dir, plan)?;
    let reused = done.len();
    let mut pending: Vec<(Cell, u32)> = all_keys(plan)
        .into_iter()
        .filter(|(c, i)| !done.contains_key(&(c.index, *i)))
        .collect();
    if let Some(limit) = options.stop_after {
        pending.truncate(limit);
    }
    info!(
        "plan {}: {} planned, {} already done, playing {}",
        manifest.plan_fingerprint,
        manifest.planned_games,
        reused,
        pending.len()
    );

    let result: Result<Vec<GameTranscript>, TournamentError> = pool(options.workers)?.install(|| {
        pending
            .par_iter()
            .map(|(cell, i)| {
                let game = play_game(plan, cell, *i, runtime)?;
                checkpoint::save_game(out_dir, &game)?;
                Ok(game)
            })
            .collect()
    });
    let played = result?;

    let mut all = done;
    for g in played.iter() {
        all.insert((g.cell_index, g.iteration), g.clone());
    }
    let transcripts: Vec<GameTranscript> = all.into_values().collect();
    let outcome = RunOutcome {
        played: played.len(),
        reused,
        planned: manifest.planned_games,
        fingerprint: manifest.plan_fingerprint,
        transcripts,
    };
    if outcome.is_complete() {
        crate::reporting::write_record_file(
            &out_dir.join(checkpoint::TRANSCRIPTS_FILE),
            &outcome.fingerprint,
            &outcome.transcripts,
        )?;
    }
    Ok(outcome)
}

/// Quick reachability check used before long model-backed runs.
pub fn preflight(client: &crate::gateway::SidecarClient) -> Result<(), TournamentError> {
    client.health().map(|_| ()).map_err(|e: TransportError| TournamentError::Gateway {
        game_id: "preflight".into(),
        source: if matches!(e, TransportError::Unreachable(_)) {
            GatewayError::SidecarUnavailable(e)
        } else {
            GatewayError::Rejected(e)
        },
    })
}
