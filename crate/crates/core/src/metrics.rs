//! Cooperation metrics over transcripts.
//!
//! The conditional rates look at round `t` given what B did before it. Moves
//! are simultaneous, so round 1 is never an opportunity and A's round-`t`
//! choice is only ever compared with B's moves in rounds before `t`.
//!
//! | rate           | opponent | opportunity at round t       | event          |
//! |----------------|----------|------------------------------|----------------|
//! | troublemaking  | AC       | B(t-1) = C                   | A(t) = D       |
//! | exploitability | AD       | B(t-1) = D                   | A(t) = C       |
//! | forgiveness    | random   | B(t-2) = D and B(t-1) = C    | A(t) = C       |
//! | retaliatory    | random   | B(t-1) = D                   | A(t) = D       |
//! | lying          | any, with messages | every round        | message != act |

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Action, GameTranscript, SetupKind};
use crate::strategies::OpponentSpec;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("{metric} needs a {expected} opponent, game {game_id} has {found}")]
    WrongOpponent {
        metric: MetricKind,
        expected: &'static str,
        found: String,
        game_id: String,
    },
    #[error("{metric} is undefined for {setup} (game {game_id})")]
    WrongSetup {
        metric: MetricKind,
        setup: SetupKind,
        game_id: String,
    },
    #[error("game {game_id} round {round} has no message from A")]
    MissingMessages { game_id: String, round: u32 },
    #[error("game {game_id} is incomplete or invalid")]
    IncompleteGame { game_id: String },
    #[error("no defined values to aggregate")]
    AllUndefined,
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Troublemaking,
    Exploitability,
    Forgiveness,
    Retaliatory,
    Lying,
}

impl MetricKind {
    pub const ALL: [MetricKind; 5] = [
        MetricKind::Troublemaking,
        MetricKind::Exploitability,
        MetricKind::Forgiveness,
        MetricKind::Retaliatory,
        MetricKind::Lying,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Troublemaking => "troublemaking",
            MetricKind::Exploitability => "exploitability",
            MetricKind::Forgiveness => "forgiveness",
            MetricKind::Retaliatory => "retaliatory",
            MetricKind::Lying => "lying",
        }
    }

    /// Whether a transcript is one this metric is measured on.
    pub fn applies_to(self, game: &GameTranscript) -> bool {
        let opp = game.condition_b.opponent();
        match self {
            MetricKind::Troublemaking => matches!(opp, Some(OpponentSpec::AlwaysCooperate)),
            MetricKind::Exploitability => matches!(opp, Some(OpponentSpec::AlwaysDefect)),
            MetricKind::Forgiveness | MetricKind::Retaliatory => matches!(opp, Some(OpponentSpec::Random { .. })),
            MetricKind::Lying => game.setup_kind.has_communication(),
        }
    }

    /// Rates whose opponent is the random strategy.
    pub fn uses_random_opponent(self) -> bool {
        matches!(self, MetricKind::Forgiveness | MetricKind::Retaliatory)
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        let t = t.strip_suffix("_rate").unwrap_or(&t);
        MetricKind::ALL
            .into_iter()
            .find(|m| m.name() == t)
            .ok_or_else(|| MetricError::UnknownMetric(s.to_string()))
    }
}

/// Events over opportunities. Undefined when there were no opportunities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct RateValue {
    pub numerator: u32,
    pub denominator: u32,
}

impl RateValue {
    pub fn new(numerator: u32, denominator: u32) -> Self {
        debug_assert!(numerator <= denominator);
        Self { numerator, denominator }
    }

    pub fn is_defined(&self) -> bool {
        self.denominator > 0
    }

    pub fn ratio(&self) -> Option<Ratio<i64>> {
        self.is_defined()
            .then(|| Ratio::new(i64::from(self.numerator), i64::from(self.denominator)))
    }

    pub fn value(&self) -> Option<f64> {
        self.is_defined()
            .then(|| f64::from(self.numerator) / f64::from(self.denominator))
    }
}

impl fmt::Display for RateValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForgivenessMode {
    /// B(t-2) = D immediately followed by B(t-1) = C.
    #[default]
    Strict,
    /// B(t-1) = C after any earlier defection by B.
    Loose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MetricOptions {
    pub forgiveness: ForgivenessMode,
}

fn require_opponent(
    metric: MetricKind,
    game: &GameTranscript,
    expected: &'static str,
) -> Result<(), MetricError> {
    if metric.applies_to(game) {
        Ok(())
    } else {
        Err(MetricError::WrongOpponent {
            metric,
            expected,
            found: game.condition_b.label(),
            game_id: game.game_id.clone(),
        })
    }
}

/// Counts opportunities and events over rounds 2.. given the moves of both
/// players so far.
fn conditional(
    game: &GameTranscript,
    opportunity: impl Fn(&[Action], usize) -> bool,
    event: Action,
) -> RateValue {
    let a: Vec<Action> = game.rounds.iter().map(|r| r.a_action).collect();
    let b: Vec<Action> = game.rounds.iter().map(|r| r.b_action).collect();
    let mut rate = RateValue::default();
    for (t, &act) in a.iter().enumerate().skip(1) {
        if opportunity(&b, t) {
            rate.denominator += 1;
            if act == event {
                rate.numerator += 1;
            }
        }
    }
    rate
}

pub fn troublemaking_rate(game: &GameTranscript) -> Result<RateValue, MetricError> {
    require_opponent(MetricKind::Troublemaking, game, "always-cooperate")?;
    Ok(conditional(game, |b, t| b[t - 1] == Action::Cooperate, Action::Defect))
}

pub fn exploitability_rate(game: &GameTranscript) -> Result<RateValue, MetricError> {
    require_opponent(MetricKind::Exploitability, game, "always-defect")?;
    Ok(conditional(game, |b, t| b[t - 1] == Action::Defect, Action::Cooperate))
}

pub fn forgiveness_rate(game: &GameTranscript, mode: ForgivenessMode) -> Result<RateValue, MetricError> {
    require_opponent(MetricKind::Forgiveness, game, "random")?;
    let rate = match mode {
        ForgivenessMode::Strict => conditional(
            game,
            |b, t| t >= 2 && b[t - 2] == Action::Defect && b[t - 1] == Action::Cooperate,
            Action::Cooperate,
        ),
        ForgivenessMode::Loose => conditional(
            game,
            |b, t| b[t - 1] == Action::Cooperate && b[..t - 1].contains(&Action::Defect),
            Action::Cooperate,
        ),
    };
    Ok(rate)
}

pub fn retaliatory_rate(game: &GameTranscript) -> Result<RateValue, MetricError> {
    require_opponent(MetricKind::Retaliatory, game, "random")?;
    Ok(conditional(game, |b, t| b[t - 1] == Action::Defect, Action::Defect))
}

pub fn lying_rate(game: &GameTranscript) -> Result<RateValue, MetricError> {
    if !game.setup_kind.has_communication() {
        return Err(MetricError::WrongSetup {
            metric: MetricKind::Lying,
            setup: game.setup_kind,
            game_id: game.game_id.clone(),
        });
    }
    let mut rate = RateValue::default();
    for r in &game.rounds {
        let message = r.a_message.ok_or_else(|| MetricError::MissingMessages {
            game_id: game.game_id.clone(),
            round: r.round_index,
        })?;
        rate.denominator += 1;
        if message != r.a_action {
            rate.numerator += 1;
        }
    }
    Ok(rate)
}

pub fn rate(kind: MetricKind, game: &GameTranscript, options: &MetricOptions) -> Result<RateValue, MetricError> {
    match kind {
        MetricKind::Troublemaking => troublemaking_rate(game),
        MetricKind::Exploitability => exploitability_rate(game),
        MetricKind::Forgiveness => forgiveness_rate(game, options.forgiveness),
        MetricKind::Retaliatory => retaliatory_rate(game),
        MetricKind::Lying => lying_rate(game),
    }
}

fn require_complete(game: &GameTranscript) -> Result<(), MetricError> {
    if game.is_valid() && game.is_complete() {
        Ok(())
    } else {
        Err(MetricError::IncompleteGame {
            game_id: game.game_id.clone(),
        })
    }
}

/// Years served by both players together. Lower is better.
pub fn total_score(game: &GameTranscript) -> Result<u32, MetricError> {
    require_complete(game)?;
    Ok(game.rounds.iter().map(|r| r.years_a + r.years_b).sum())
}

/// A's years minus B's years. Negative means A served less than B.
pub fn personal_score(game: &GameTranscript) -> Result<i64, MetricError> {
    require_complete(game)?;
    Ok(game
        .rounds
        .iter()
        .map(|r| i64::from(r.years_a) - i64::from(r.years_b))
        .sum())
}

/// Median and quartiles over the defined values of a set of rates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    pub n: usize,
    pub n_defined: usize,
    pub median: Ratio<i64>,
    pub q1: Ratio<i64>,
    pub q3: Ratio<i64>,
}

/// Linear-interpolation quantile (R type 7) of an ascending slice. The
/// median of an even-sized set is the midpoint of the two central values.
pub fn quantile(sorted: &[Ratio<i64>], q: Ratio<i64>) -> Ratio<i64> {
    assert!(!sorted.is_empty());
    let h = Ratio::from_integer(sorted.len() as i64 - 1) * q;
    let lo = h.floor().to_integer() as usize;
    let frac = h - h.floor();
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Undefined values are dropped, not treated as zero.
pub fn aggregate(values: &[RateValue]) -> Result<Summary, MetricError> {
    let mut defined: Vec<Ratio<i64>> = values.iter().filter_map(RateValue::ratio).collect();
    if defined.is_empty() {
        return Err(MetricError::AllUndefined);
    }
    defined.sort();
    Ok(Summary {
        n: values.len(),
        n_defined: defined.len(),
        median: quantile(&defined, Ratio::new(1, 2)),
        q1: quantile(&defined, Ratio::new(1, 4)),
        q3: quantile(&defined, Ratio::new(3, 4)),
    })
}

/// Sums events and opportunities across games.
pub fn pool(values: &[RateValue]) -> RateValue {
    values.iter().fold(RateValue::default(), |acc, v| RateValue {
        numerator: acc.numerator + v.numerator,
        denominator: acc.denominator + v.denominator,
    })
}

pub fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}
