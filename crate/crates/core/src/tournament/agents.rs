//! Turn-taking for scripted and model-backed players.

use log::warn;

use crate::game::{Action, DecisionSource, PayoffMatrix, Perspective, RoundRecord, SetupKind};
use crate::gateway::{build_prompts, decide_via_llm, AgentBinding, ChatBackend, Expect, GatewayError, RoundContext, Stage};
use crate::seed::{decode_seed, Stream};
use crate::strategies::StrategyError;
use crate::templates::TemplateSet;

/// Why a player could not produce a turn.
#[derive(Debug)]
pub(crate) enum TurnError {
    /// The game cannot continue; it is recorded as invalid.
    Invalidates(String),
    /// The run cannot continue.
    Fatal(GatewayError),
}

impl From<StrategyError> for TurnError {
    fn from(e: StrategyError) -> Self {
        TurnError::Invalidates(e.to_string())
    }
}

impl From<GatewayError> for TurnError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::RetriesExhausted { ref outputs, .. } => {
                for (i, o) in outputs.iter().enumerate() {
                    warn!("rejected reply {}: {:?}", i + 1, o);
                }
                TurnError::Invalidates(e.to_string())
            }
            other => TurnError::Fatal(other),
        }
    }
}

pub(crate) struct Turn {
    pub action: Option<Action>,
    pub message: Option<Action>,
    pub raw: String,
    pub source: DecisionSource,
}

/// Shared, per-game inputs to every player call.
pub(crate) struct Table<'a> {
    pub setup: SetupKind,
    pub matrix: &'a PayoffMatrix,
    pub rounds_total: u32,
    pub game_seed: u64,
    pub templates: &'a TemplateSet,
    pub backend: Option<&'a dyn ChatBackend>,
}

pub(crate) struct Player {
    pub binding: AgentBinding,
    pub role: Perspective,
}

fn stage_index(stage: Stage) -> u32 {
    match stage {
        Stage::Decide => 0,
        Stage::Declare => 1,
        Stage::Act => 2,
    }
}

fn expect(setup: SetupKind, stage: Stage) -> Expect {
    match (setup, stage) {
        (SetupKind::Setup2, Stage::Decide) => Expect::MessageAndAction,
        (_, Stage::Declare) => Expect::Message,
        _ => Expect::Action,
    }
}

impl Player {
    /// `opponent_said` is B's intent (Setup 2) or the other player's message
    /// (Setup 3, act stage); `own_message` is this player's declared message.
    pub fn turn(
        &self,
        table: &Table<'_>,
        stage: Stage,
        history: &[RoundRecord],
        opponent_said: Option<Action>,
        own_message: Option<Action>,
    ) -> Result<Turn, TurnError> {
        let round = history.len() as u32 + 1;
        let wants = expect(table.setup, stage);
        match &self.binding {
            AgentBinding::Scripted { policy, messages } => {
                let opponent_moves: Vec<Action> = history
                    .iter()
                    .map(|r| match self.role {
                        Perspective::A => r.b_action,
                        Perspective::B => r.a_action,
                    })
                    .collect();
                let action = policy.decide(round as usize, &opponent_moves)?;
                let message = match wants {
                    Expect::Action => None,
                    _ => Some(messages.message_for(action)),
                };
                Ok(Turn {
                    action: (wants != Expect::Message).then_some(action),
                    message,
                    raw: String::new(),
                    source: DecisionSource::Script { policy: policy.label() },
                })
            }
            AgentBinding::Llm(binding) => {
                let backend = table
                    .backend
                    .expect("model-backed plans are rejected without a backend before play");
                let ctx = RoundContext {
                    stage,
                    round,
                    rounds_total: table.rounds_total,
                    opponent_intent: opponent_said,
                    own_message,
                };
                let prompts = build_prompts(table.templates, table.matrix, table.setup, self.role, history, &ctx)
                    .map_err(GatewayError::from)?;
                let stream = match self.role {
                    Perspective::A => Stream::PlayerA,
                    Perspective::B => Stream::PlayerB,
                };
                let seed = decode_seed(table.game_seed, stream, round, stage_index(stage));
                let d = decide_via_llm(backend, binding, &prompts, seed, wants)?;
                Ok(Turn {
                    action: d.action,
                    message: d.message,
                    raw: d.raw,
                    source: DecisionSource::Model {
                        model_id: d.model_id,
                        retries: d.retries,
                        steering_applied: d.steering_applied,
                    },
                })
            }
            AgentBinding::Rule { spec } => Err(TurnError::Invalidates(format!(
                "rule strategy {spec} cannot take an agent turn"
            ))),
        }
    }
}
