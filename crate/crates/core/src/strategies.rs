//! Player B's rule-based behaviours and the scripted policies used as
//! deterministic stand-ins for Player A in tests and dry runs.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::Action;

#[derive(Debug, Error, PartialEq)]
pub enum StrategyError {
    #[error("scripted sequence of length {len} exhausted at round {round}")]
    ScriptExhausted { len: usize, round: usize },
    #[error("{0} is not a plain rule strategy")]
    NotARuleStrategy(String),
    #[error("{0} does not react to messages")]
    NotAResponder(String),
    #[error("no declared intent pending")]
    NoPendingIntent,
    #[error("defection probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("cannot parse strategy label {0:?}")]
    UnknownLabel(String),
}

/// Player B for Setups 1 and 2.
///
/// Serialized as its label: `AC`, `AD`, `RD0.3`, `ALT`, `SELF`, `SEQ:CDDC`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum OpponentSpec {
    AlwaysCooperate,
    AlwaysDefect,
    /// Defects with probability `p` each round.
    Random { p: f64 },
    Altruistic,
    Selfish,
    Scripted { sequence: Vec<Action> },
}

impl OpponentSpec {
    pub const DEFAULT_RANDOM_SWEEP: [f64; 3] = [0.3, 0.5, 0.7];

    pub fn random(p: f64) -> Result<Self, StrategyError> {
        if (0.0..=1.0).contains(&p) {
            Ok(OpponentSpec::Random { p })
        } else {
            Err(StrategyError::InvalidProbability(p))
        }
    }

    /// AC, AD and the three random opponents.
    pub fn setup1_defaults() -> Vec<OpponentSpec> {
        let mut v = vec![OpponentSpec::AlwaysCooperate, OpponentSpec::AlwaysDefect];
        v.extend(Self::DEFAULT_RANDOM_SWEEP.iter().map(|&p| OpponentSpec::Random { p }));
        v
    }

    pub fn setup2_defaults() -> Vec<OpponentSpec> {
        vec![OpponentSpec::Altruistic, OpponentSpec::Selfish]
    }

    pub fn label(&self) -> String {
        match self {
            OpponentSpec::AlwaysCooperate => "AC".into(),
            OpponentSpec::AlwaysDefect => "AD".into(),
            OpponentSpec::Random { p } => format!("RD{p}"),
            OpponentSpec::Altruistic => "ALT".into(),
            OpponentSpec::Selfish => "SELF".into(),
            OpponentSpec::Scripted { sequence } => format!("SEQ:{}", encode_sequence(sequence)),
        }
    }

    /// Setup-1 opponents choose without hearing anything from A.
    pub fn is_rule_strategy(&self) -> bool {
        !self.is_responder()
    }

    /// Setup-2 opponents declare an intent and adjust to A's message.
    pub fn is_responder(&self) -> bool {
        matches!(self, OpponentSpec::Altruistic | OpponentSpec::Selfish)
    }
}

impl fmt::Display for OpponentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for OpponentSpec {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let upper = t.to_ascii_uppercase();
        match upper.as_str() {
            "AC" => return Ok(OpponentSpec::AlwaysCooperate),
            "AD" => return Ok(OpponentSpec::AlwaysDefect),
            "ALT" => return Ok(OpponentSpec::Altruistic),
            "SELF" => return Ok(OpponentSpec::Selfish),
            _ => {}
        }
        if let Some(p) = upper.strip_prefix("RD") {
            let p: f64 = p
                .trim_start_matches('(')
                .trim_end_matches(')')
                .parse()
                .map_err(|_| StrategyError::UnknownLabel(s.to_string()))?;
            return OpponentSpec::random(p);
        }
        if let Some(seq) = upper.strip_prefix("SEQ:") {
            return Ok(OpponentSpec::Scripted {
                sequence: decode_sequence(seq).ok_or_else(|| StrategyError::UnknownLabel(s.to_string()))?,
            });
        }
        Err(StrategyError::UnknownLabel(s.to_string()))
    }
}

impl TryFrom<String> for OpponentSpec {
    type Error = StrategyError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<OpponentSpec> for String {
    fn from(o: OpponentSpec) -> String {
        o.label()
    }
}

fn encode_sequence(seq: &[Action]) -> String {
    seq.iter()
        .map(|a| match a {
            Action::Cooperate => 'C',
            Action::Defect => 'D',
        })
        .collect()
}

fn decode_sequence(s: &str) -> Option<Vec<Action>> {
    s.chars()
        .map(|c| match c.to_ascii_uppercase() {
            'C' => Some(Action::Cooperate),
            'D' => Some(Action::Defect),
            _ => None,
        })
        .collect::<Option<Vec<_>>>()
        .filter(|v| !v.is_empty())
}

/// Per-game opponent state. The random stream is derived from the game seed
/// only, so equal seeds give equal action sequences.
#[derive(Debug, Clone)]
pub struct StrategyState {
    rng: ChaCha8Rng,
    pending_intent: Option<Action>,
    cursor: usize,
}

impl StrategyState {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            pending_intent: None,
            cursor: 0,
        }
    }

    pub fn pending_intent(&self) -> Option<Action> {
        self.pending_intent
    }
}

/// Setup-1 move of a rule strategy. History is accepted for interface
/// symmetry; none of the rule strategies consult it.
pub fn rule_decide(
    spec: &OpponentSpec,
    state: &mut StrategyState,
    _history: &[crate::game::RoundRecord],
) -> Result<Action, StrategyError> {
    match spec {
        OpponentSpec::AlwaysCooperate => Ok(Action::Cooperate),
        OpponentSpec::AlwaysDefect => Ok(Action::Defect),
        OpponentSpec::Random { p } => {
            if state.rng.gen_bool(*p) {
                Ok(Action::Defect)
            } else {
                Ok(Action::Cooperate)
            }
        }
        OpponentSpec::Scripted { sequence } => {
            let a = sequence.get(state.cursor).copied().ok_or(StrategyError::ScriptExhausted {
                len: sequence.len(),
                round: state.cursor + 1,
            })?;
            state.cursor += 1;
            Ok(a)
        }
        OpponentSpec::Altruistic | OpponentSpec::Selfish => Err(StrategyError::NotARuleStrategy(spec.label())),
    }
}

/// Draws B's announced move uniformly at random and remembers it.
pub fn declare_intent(state: &mut StrategyState) -> Action {
    let intent = if state.rng.gen::<bool>() {
        Action::Cooperate
    } else {
        Action::Defect
    };
    state.pending_intent = Some(intent);
    intent
}

/// Switches to cooperate when it meant to defect but A promises to
/// cooperate; switches to defect when it meant to cooperate but A announces
/// defection.
pub fn altruistic_adjust(intent: Action, heard_from_a: Action) -> Action {
    match (intent, heard_from_a) {
        (Action::Defect, Action::Cooperate) => Action::Cooperate,
        (Action::Cooperate, Action::Defect) => Action::Defect,
        (keep, _) => keep,
    }
}

/// Switches to defect whenever it meant to cooperate, whatever A says; an
/// initial defect is kept.
pub fn selfish_adjust(intent: Action, heard_from_a: Action) -> Action {
    match (intent, heard_from_a) {
        (Action::Cooperate, Action::Cooperate) => Action::Defect,
        (Action::Cooperate, Action::Defect) => Action::Defect,
        (keep, _) => keep,
    }
}

/// Setup-2 move: adjusts the pending intent to what A said and clears it.
pub fn respond(spec: &OpponentSpec, state: &mut StrategyState, heard_from_a: Action) -> Result<Action, StrategyError> {
    let intent = state.pending_intent.take().ok_or(StrategyError::NoPendingIntent)?;
    match spec {
        OpponentSpec::Altruistic => Ok(altruistic_adjust(intent, heard_from_a)),
        OpponentSpec::Selfish => Ok(selfish_adjust(intent, heard_from_a)),
        other => Err(StrategyError::NotAResponder(other.label())),
    }
}

/// What a scripted player says relative to what it does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessagePolicy {
    Truthful,
    Inverted,
    AlwaysCooperate,
    AlwaysDefect,
}

impl MessagePolicy {
    pub fn message_for(self, action: Action) -> Action {
        match self {
            MessagePolicy::Truthful => action,
            MessagePolicy::Inverted => action.flipped(),
            MessagePolicy::AlwaysCooperate => Action::Cooperate,
            MessagePolicy::AlwaysDefect => Action::Defect,
        }
    }
}

/// Deterministic policies for a player that would otherwise be an LLM.
///
/// Serialized as `ALLC`, `ALLD`, `TFT` or `SEQ:CCDC`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ScriptPolicy {
    AlwaysCooperate,
    AlwaysDefect,
    TitForTat,
    Sequence(Vec<Action>),
}

impl ScriptPolicy {
    pub fn label(&self) -> String {
        match self {
            ScriptPolicy::AlwaysCooperate => "ALLC".into(),
            ScriptPolicy::AlwaysDefect => "ALLD".into(),
            ScriptPolicy::TitForTat => "TFT".into(),
            ScriptPolicy::Sequence(seq) => format!("SEQ:{}", encode_sequence(seq)),
        }
    }

    /// Move for `round` (1-based) given the opponent's earlier moves.
    pub fn decide(&self, round: usize, opponent_moves: &[Action]) -> Result<Action, StrategyError> {
        match self {
            ScriptPolicy::AlwaysCooperate => Ok(Action::Cooperate),
            ScriptPolicy::AlwaysDefect => Ok(Action::Defect),
            ScriptPolicy::TitForTat => Ok(opponent_moves.last().copied().unwrap_or(Action::Cooperate)),
            ScriptPolicy::Sequence(seq) => seq
                .get(round - 1)
                .copied()
                .ok_or(StrategyError::ScriptExhausted { len: seq.len(), round }),
        }
    }
}

impl FromStr for ScriptPolicy {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        match upper.as_str() {
            "ALLC" => Ok(ScriptPolicy::AlwaysCooperate),
            "ALLD" => Ok(ScriptPolicy::AlwaysDefect),
            "TFT" => Ok(ScriptPolicy::TitForTat),
            _ => upper
                .strip_prefix("SEQ:")
                .and_then(decode_sequence)
                .map(ScriptPolicy::Sequence)
                .ok_or_else(|| StrategyError::UnknownLabel(s.to_string())),
        }
    }
}

impl TryFrom<String> for ScriptPolicy {
    type Error = StrategyError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ScriptPolicy> for String {
    fn from(p: ScriptPolicy) -> String {
        p.label()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Action::{Cooperate as C, Defect as D};

    #[test]
    fn always_strategies_ignore_history() {
        let mut st = StrategyState::new(1);
        for _ in 0..5 {
            assert_eq!(rule_decide(&OpponentSpec::AlwaysDefect, &mut st, &[]).unwrap(), D);
            assert_eq!(rule_decide(&OpponentSpec::AlwaysCooperate, &mut st, &[]).unwrap(), C);
        }
    }

    #[test]
    fn degenerate_random() {
        let mut st = StrategyState::new(9);
        for _ in 0..100 {
            assert_eq!(rule_decide(&OpponentSpec::Random { p: 1.0 }, &mut st, &[]).unwrap(), D);
            assert_eq!(rule_decide(&OpponentSpec::Random { p: 0.0 }, &mut st, &[]).unwrap(), C);
        }
    }

    #[test]
    fn scripted_exhausts() {
        let spec = OpponentSpec::Scripted { sequence: vec![C, D] };
        let mut st = StrategyState::new(0);
        assert_eq!(rule_decide(&spec, &mut st, &[]).unwrap(), C);
        assert_eq!(rule_decide(&spec, &mut st, &[]).unwrap(), D);
        assert_eq!(
            rule_decide(&spec, &mut st, &[]).unwrap_err(),
            StrategyError::ScriptExhausted { len: 2, round: 3 }
        );
    }

    #[test]
    fn responders_are_not_rule_strategies() {
        let mut st = StrategyState::new(0);
        assert!(rule_decide(&OpponentSpec::Selfish, &mut st, &[]).is_err());
        assert_eq!(respond(&OpponentSpec::Selfish, &mut st, C), Err(StrategyError::NoPendingIntent));
        declare_intent(&mut st);
        assert!(respond(&OpponentSpec::AlwaysDefect, &mut st, C).is_err());
    }

    #[test]
    fn altruistic_table() {
        assert_eq!(altruistic_adjust(D, C), C);
        assert_eq!(altruistic_adjust(C, D), D);
        assert_eq!(altruistic_adjust(C, C), C);
        assert_eq!(altruistic_adjust(D, D), D);
    }

    #[test]
    fn selfish_table() {
        assert_eq!(selfish_adjust(C, C), D);
        assert_eq!(selfish_adjust(C, D), D);
        assert_eq!(selfish_adjust(D, C), D);
        assert_eq!(selfish_adjust(D, D), D);
    }

    #[test]
    fn intent_golden_and_deterministic() {
        // pinned from the ChaCha8 stream; changes here change every Setup-2 game
        let mut st = StrategyState::new(1);
        let first: Vec<Action> = (0..8).map(|_| declare_intent(&mut st)).collect();
        let mut again = StrategyState::new(1);
        let second: Vec<Action> = (0..8).map(|_| declare_intent(&mut again)).collect();
        assert_eq!(first, second);
        assert_eq!(st.pending_intent(), first.last().copied());
        assert_eq!(first, GOLDEN_SEED1_INTENTS);
    }

    // regression pin for the ChaCha8 stream seeded with 1
    const GOLDEN_SEED1_INTENTS: [Action; 8] = [C, D, C, D, D, C, D, D];

    #[test]
    fn intent_is_roughly_uniform() {
        let mut st = StrategyState::new(12345);
        let n = 10_000;
        let coop = (0..n).filter(|_| declare_intent(&mut st) == C).count();
        let frac = coop as f64 / n as f64;
        assert!((0.48..=0.52).contains(&frac), "{frac}");
    }

    #[test]
    fn labels_roundtrip() {
        for spec in [
            OpponentSpec::AlwaysCooperate,
            OpponentSpec::AlwaysDefect,
            OpponentSpec::Random { p: 0.3 },
            OpponentSpec::Altruistic,
            OpponentSpec::Selfish,
            OpponentSpec::Scripted { sequence: vec![C, D, D] },
        ] {
            assert_eq!(spec.label().parse::<OpponentSpec>().unwrap(), spec);
            let json = serde_json::to_string(&spec).unwrap();
            assert_eq!(serde_json::from_str::<OpponentSpec>(&json).unwrap(), spec);
        }
        assert_eq!("RD(0.5)".parse::<OpponentSpec>().unwrap(), OpponentSpec::Random { p: 0.5 });
        assert!("RD1.5".parse::<OpponentSpec>().is_err());
        assert!("SEQ:".parse::<OpponentSpec>().is_err());
        for p in ["ALLC", "ALLD", "TFT", "SEQ:CD"] {
            assert_eq!(p.parse::<ScriptPolicy>().unwrap().label(), p);
        }
    }

    #[test]
    fn tit_for_tat_copies_last_move() {
        let tft = ScriptPolicy::TitForTat;
        assert_eq!(tft.decide(1, &[]).unwrap(), C);
        assert_eq!(tft.decide(2, &[D]).unwrap(), D);
        assert_eq!(tft.decide(3, &[D, C]).unwrap(), C);
        assert!(ScriptPolicy::Sequence(vec![C]).decide(2, &[C]).is_err());
    }

    #[test]
    fn message_policies() {
        assert_eq!(MessagePolicy::Truthful.message_for(D), D);
        assert_eq!(MessagePolicy::Inverted.message_for(D), C);
        assert_eq!(MessagePolicy::AlwaysCooperate.message_for(D), C);
    }
}
