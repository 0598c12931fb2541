//! Prisoner's Dilemma rules: actions, the prison-years payoff table, round
//! sequencing and history summaries.
//!
//! Payoffs are years in prison, so lower is better everywhere in this crate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::steering::Condition;
use crate::strategies::OpponentSpec;
use crate::templates::{TemplateError, TemplateSet};

pub const DEFAULT_ROUNDS: u32 = 10;

#[derive(Debug, Error, PartialEq)]
pub enum GameError {
    #[error("game already has all {0} rounds")]
    GameComplete(u32),
    #[error("{setup} requires {field} but it is absent")]
    MissingMessage { setup: SetupKind, field: &'static str },
    #[error("{setup} does not carry {field}")]
    UnexpectedMessage { setup: SetupKind, field: &'static str },
    #[error("payoff matrix is not symmetric: {0}")]
    AsymmetricMatrix(String),
    #[error("payoff matrix violates prisoner's dilemma cost ordering: {0}")]
    NotPrisonersDilemma(String),
    #[error("cannot parse {0:?} as an action")]
    UnparseableAction(String),
    #[error("unknown setup kind {0:?}")]
    UnknownSetup(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Cooperate,
    Defect,
}

impl Action {
    pub const BOTH: [Action; 2] = [Action::Cooperate, Action::Defect];

    pub fn word(self) -> &'static str {
        match self {
            Action::Cooperate => "cooperate",
            Action::Defect => "defect",
        }
    }

    pub fn flipped(self) -> Action {
        match self {
            Action::Cooperate => Action::Defect,
            Action::Defect => Action::Cooperate,
        }
    }

    fn index(self) -> usize {
        match self {
            Action::Cooperate => 0,
            Action::Defect => 1,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.word())
    }
}

impl FromStr for Action {
    type Err = GameError;

    /// Case-insensitive, surrounding whitespace ignored; nothing else accepted.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("cooperate") {
            Ok(Action::Cooperate)
        } else if t.eq_ignore_ascii_case("defect") {
            Ok(Action::Defect)
        } else {
            Err(GameError::UnparseableAction(s.to_string()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetupKind {
    /// Plain IPD against a rule-based opponent.
    Setup1,
    /// Rule-based opponent declares a random intent; A sends a message.
    Setup2,
    /// Two agents, both exchanging messages before acting.
    Setup3,
}

impl SetupKind {
    pub fn has_communication(self) -> bool {
        !matches!(self, SetupKind::Setup1)
    }

    pub fn key(self) -> &'static str {
        match self {
            SetupKind::Setup1 => "setup1",
            SetupKind::Setup2 => "setup2",
            SetupKind::Setup3 => "setup3",
        }
    }
}

impl fmt::Display for SetupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for SetupKind {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "setup1" | "1" => Ok(SetupKind::Setup1),
            "setup2" | "2" => Ok(SetupKind::Setup2),
            "setup3" | "3" => Ok(SetupKind::Setup3),
            _ => Err(GameError::UnknownSetup(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Perspective {
    A,
    B,
}

/// Years served by each player for one joint action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Years {
    pub a: u32,
    pub b: u32,
}

/// 2x2 table of prison years indexed by (A's action, B's action).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayoffMatrix {
    cells: [[Years; 2]; 2],
}

impl Default for PayoffMatrix {
    /// The standard table: 1/1 mutual cooperation, 3/3 mutual defection,
    /// 5/0 for a cooperator facing a defector.
    fn default() -> Self {
        Self {
            cells: [
                [Years { a: 1, b: 1 }, Years { a: 5, b: 0 }],
                [Years { a: 0, b: 5 }, Years { a: 3, b: 3 }],
            ],
        }
    }
}

impl PayoffMatrix {
    /// Builds a matrix from `(years_A, years_B)` cells. Symmetry is always
    /// required; the dilemma cost ordering unless `allow_non_pd` is set.
    pub fn new(
        cc: (u32, u32),
        cd: (u32, u32),
        dc: (u32, u32),
        dd: (u32, u32),
        allow_non_pd: bool,
    ) -> Result<Self, GameError> {
        let y = |(a, b): (u32, u32)| Years { a, b };
        let m = Self {
            cells: [[y(cc), y(cd)], [y(dc), y(dd)]],
        };
        m.check_symmetry()?;
        if !allow_non_pd {
            m.check_dilemma_ordering()?;
        }
        Ok(m)
    }

    pub fn payoff(&self, a: Action, b: Action) -> Years {
        self.cells[a.index()][b.index()]
    }

    fn check_symmetry(&self) -> Result<(), GameError> {
        for a in Action::BOTH {
            for b in Action::BOTH {
                if self.payoff(a, b).a != self.payoff(b, a).b {
                    return Err(GameError::AsymmetricMatrix(format!(
                        "years_A({a},{b}) = {} but years_B({b},{a}) = {}",
                        self.payoff(a, b).a,
                        self.payoff(b, a).b
                    )));
                }
            }
        }
        Ok(())
    }

    /// Temptation < reward < punishment < sucker, measured in years.
    pub fn check_dilemma_ordering(&self) -> Result<(), GameError> {
        let t = self.payoff(Action::Defect, Action::Cooperate).a;
        let r = self.payoff(Action::Cooperate, Action::Cooperate).a;
        let p = self.payoff(Action::Defect, Action::Defect).a;
        let s = self.payoff(Action::Cooperate, Action::Defect).a;
        if t < r && r < p && p < s {
            Ok(())
        } else {
            Err(GameError::NotPrisonersDilemma(format!(
                "need temptation < reward < punishment < sucker, got {t}, {r}, {p}, {s}"
            )))
        }
    }
}

/// Where an action came from. Every action in a transcript has one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecisionSource {
    Script { policy: String },
    Rule { strategy: String },
    Model { model_id: String, retries: u32, steering_applied: bool },
}

/// One player's contribution to a round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub action: Action,
    pub message: Option<Action>,
    /// For model players, the verbatim model output; for scripts and rules a
    /// short description.
    pub reasoning: String,
    pub source: DecisionSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_index: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_declared_intent: Option<Action>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_message: Option<Action>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_message: Option<Action>,
    pub a_action: Action,
    pub b_action: Action,
    pub years_a: u32,
    pub years_b: u32,
    pub a_reasoning: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_reasoning: Option<String>,
    pub a_source: DecisionSource,
    pub b_source: DecisionSource,
}

impl RoundRecord {
    /// A's communicated intent as seen by B and B's as seen by A.
    fn messages_for(&self, perspective: Perspective) -> (Option<Action>, Option<Action>) {
        let b_said = self.b_message.or(self.b_declared_intent);
        match perspective {
            Perspective::A => (self.a_message, b_said),
            Perspective::B => (b_said, self.a_message),
        }
    }
}

/// Player B: a rule-based opponent or another (possibly steered) agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Counterpart {
    Rule { spec: OpponentSpec },
    Agent { condition: Condition },
}

impl Counterpart {
    pub fn label(&self) -> String {
        match self {
            Counterpart::Rule { spec } => spec.label(),
            Counterpart::Agent { condition } => condition.label(),
        }
    }

    pub fn opponent(&self) -> Option<&OpponentSpec> {
        match self {
            Counterpart::Rule { spec } => Some(spec),
            Counterpart::Agent { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum GameStatus {
    Valid,
    Invalid { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameTranscript {
    pub game_id: String,
    pub setup_kind: SetupKind,
    pub condition_a: Condition,
    pub condition_b: Counterpart,
    pub cell_index: u32,
    pub iteration: u32,
    pub seed: u64,
    pub rounds_per_game: u32,
    pub status: GameStatus,
    pub rounds: Vec<RoundRecord>,
}

impl GameTranscript {
    pub fn is_valid(&self) -> bool {
        matches!(self.status, GameStatus::Valid)
    }

    pub fn is_complete(&self) -> bool {
        self.rounds.len() == self.rounds_per_game as usize
    }

    /// Checks the structural invariants: consecutive 1-based round indices,
    /// stored years equal to the table, communication fields matching the
    /// setup, and a full set of rounds for valid games.
    pub fn check_invariants(&self, matrix: &PayoffMatrix) -> Result<(), String> {
        if self.is_valid() && !self.is_complete() {
            return Err(format!(
                "{}: valid game has {} of {} rounds",
                self.game_id,
                self.rounds.len(),
                self.rounds_per_game
            ));
        }
        for (i, r) in self.rounds.iter().enumerate() {
            if r.round_index as usize != i + 1 {
                return Err(format!("{}: round {} has index {}", self.game_id, i + 1, r.round_index));
            }
            let y = matrix.payoff(r.a_action, r.b_action);
            if (y.a, y.b) != (r.years_a, r.years_b) {
                return Err(format!("{}: round {} stores wrong years", self.game_id, r.round_index));
            }
            check_communication(self.setup_kind, r.a_message, r.b_message, r.b_declared_intent)
                .map_err(|e| format!("{}: round {}: {e}", self.game_id, r.round_index))?;
        }
        Ok(())
    }
}

fn check_communication(
    setup: SetupKind,
    a_message: Option<Action>,
    b_message: Option<Action>,
    b_declared_intent: Option<Action>,
) -> Result<(), GameError> {
    let expect = |present: bool, required: bool, field| match (present, required) {
        (false, true) => Err(GameError::MissingMessage { setup, field }),
        (true, false) => Err(GameError::UnexpectedMessage { setup, field }),
        _ => Ok(()),
    };
    let (need_a, need_b, need_intent) = match setup {
        SetupKind::Setup1 => (false, false, false),
        SetupKind::Setup2 => (true, false, true),
        SetupKind::Setup3 => (true, true, false),
    };
    expect(a_message.is_some(), need_a, "a_message")?;
    expect(b_declared_intent.is_some(), need_intent, "b_declared_intent")?;
    expect(b_message.is_some(), need_b, "b_message")?;
    Ok(())
}

/// Sequential state of one game in progress.
#[derive(Debug, Clone)]
pub struct GameState {
    setup: SetupKind,
    matrix: PayoffMatrix,
    rounds_limit: u32,
    rounds: Vec<RoundRecord>,
}

impl GameState {
    pub fn new(setup: SetupKind, matrix: PayoffMatrix, rounds_limit: u32) -> Self {
        Self {
            setup,
            matrix,
            rounds_limit,
            rounds: Vec::with_capacity(rounds_limit as usize),
        }
    }

    pub fn setup(&self) -> SetupKind {
        self.setup
    }

    pub fn rounds(&self) -> &[RoundRecord] {
        &self.rounds
    }

    pub fn rounds_limit(&self) -> u32 {
        self.rounds_limit
    }

    /// 1-based index of the round about to be played.
    pub fn next_round(&self) -> u32 {
        self.rounds.len() as u32 + 1
    }

    pub fn is_complete(&self) -> bool {
        self.rounds.len() as u32 >= self.rounds_limit
    }

    pub fn into_rounds(self) -> Vec<RoundRecord> {
        self.rounds
    }

    /// Scores the joint decision and appends it. `b_declared_intent` is B's
    /// randomly drawn announcement in Setup 2 and must be `None` otherwise.
    pub fn play_round(
        &mut self,
        a: Decision,
        b: Decision,
        b_declared_intent: Option<Action>,
    ) -> Result<&RoundRecord, GameError> {
        if self.is_complete() {
            return Err(GameError::GameComplete(self.rounds_limit));
        }
        check_communication(self.setup, a.message, b.message, b_declared_intent)?;
        let years = self.matrix.payoff(a.action, b.action);
        let b_reasoning = (!b.reasoning.is_empty()).then_some(b.reasoning);
        self.rounds.push(RoundRecord {
            round_index: self.next_round(),
            b_declared_intent,
            a_message: a.message,
            b_message: b.message,
            a_action: a.action,
            b_action: b.action,
            years_a: years.a,
            years_b: years.b,
            a_reasoning: a.reasoning,
            b_reasoning,
            a_source: a.source,
            b_source: b.source,
        });
        Ok(self.rounds.last().expect("just pushed"))
    }
}

fn years_phrase(n: u32) -> String {
    if n == 1 {
        "1 year".to_string()
    } else {
        format!("{n} years")
    }
}

/// Per-round summary of `rounds` as seen by `perspective`, one line per
/// round, using the built-in templates.
pub fn history_summary(rounds: &[RoundRecord], perspective: Perspective, setup: SetupKind) -> String {
    history_summary_with(&TemplateSet::builtin(), rounds, perspective, setup)
        .expect("built-in history templates bind every placeholder")
}

pub fn history_summary_with(
    templates: &TemplateSet,
    rounds: &[RoundRecord],
    perspective: Perspective,
    setup: SetupKind,
) -> Result<String, TemplateError> {
    if rounds.is_empty() {
        return templates.render("history_empty", &[]);
    }
    let key = format!("history_{}", setup.key());
    let mut lines = Vec::with_capacity(rounds.len());
    for r in rounds {
        let (own_action, other_action, own_years, other_years) = match perspective {
            Perspective::A => (r.a_action, r.b_action, r.years_a, r.years_b),
            Perspective::B => (r.b_action, r.a_action, r.years_b, r.years_a),
        };
        let (own_message, other_message) = r.messages_for(perspective);
        let mut vars = vec![
            ("round", r.round_index.to_string()),
            ("own_action", own_action.to_string()),
            ("other_action", other_action.to_string()),
            ("own_years", years_phrase(own_years)),
            ("other_years", years_phrase(other_years)),
        ];
        if let Some(m) = own_message {
            vars.push(("own_message", m.to_string()));
        }
        if let Some(m) = other_message {
            vars.push(("other_message", m.to_string()));
        }
        lines.push(templates.render(&key, &vars)?);
    }
    Ok(lines.join("\n"))
}
