//! Personality steering conditions.
//!
//! A [`Condition`] is what an LLM-backed player runs under: either the
//! unsteered baseline or a [`SteeringSpec`] naming a Big Five trait, a
//! direction, a coefficient and the (negative-indexed) layer range the
//! sidecar injects the trait vector into.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_COEFFICIENT: f64 = 3.5;
/// Layers are counted from the final transformer block, `-1` being the last.
pub const DEFAULT_LAYER_START: i32 = -20;
pub const DEFAULT_LAYER_END: i32 = -5;

#[derive(Debug, Error, PartialEq)]
pub enum SteeringError {
    #[error("coefficient must be positive, got {0}")]
    NonPositiveCoefficient(f64),
    #[error("empty layer range [{start}, {end}]")]
    EmptyLayerRange { start: i32, end: i32 },
    #[error("unknown condition label {0:?}")]
    UnknownLabel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trait {
    Agreeableness,
    Conscientiousness,
    Extraversion,
    Neuroticism,
    Openness,
}

impl Trait {
    pub const ALL: [Trait; 5] = [
        Trait::Agreeableness,
        Trait::Conscientiousness,
        Trait::Extraversion,
        Trait::Neuroticism,
        Trait::Openness,
    ];

    pub fn initial(self) -> char {
        match self {
            Trait::Agreeableness => 'A',
            Trait::Conscientiousness => 'C',
            Trait::Extraversion => 'E',
            Trait::Neuroticism => 'N',
            Trait::Openness => 'O',
        }
    }

    /// Lowercase name used on the wire.
    pub fn wire_name(self) -> &'static str {
        match self {
            Trait::Agreeableness => "agreeableness",
            Trait::Conscientiousness => "conscientiousness",
            Trait::Extraversion => "extraversion",
            Trait::Neuroticism => "neuroticism",
            Trait::Openness => "openness",
        }
    }

    fn from_initial(c: char) -> Option<Trait> {
        Trait::ALL
            .into_iter()
            .find(|t| t.initial() == c.to_ascii_uppercase())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Plus,
    Minus,
}

impl Direction {
    pub fn sign(self) -> i8 {
        match self {
            Direction::Plus => 1,
            Direction::Minus => -1,
        }
    }

    /// `"+1"` / `"-1"` as sent to the sidecar.
    pub fn wire_value(self) -> &'static str {
        match self {
            Direction::Plus => "+1",
            Direction::Minus => "-1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringSpec {
    #[serde(rename = "trait")]
    pub personality: Trait,
    pub direction: Direction,
    pub coefficient: f64,
    pub layer_start: i32,
    pub layer_end: i32,
}

impl SteeringSpec {
    pub fn new(personality: Trait, direction: Direction) -> Self {
        Self {
            personality,
            direction,
            coefficient: DEFAULT_COEFFICIENT,
            layer_start: DEFAULT_LAYER_START,
            layer_end: DEFAULT_LAYER_END,
        }
    }

    pub fn with_coefficient(mut self, coefficient: f64) -> Self {
        self.coefficient = coefficient;
        self
    }

    pub fn with_layers(mut self, start: i32, end: i32) -> Self {
        self.layer_start = start;
        self.layer_end = end;
        self
    }

    pub fn validate(&self) -> Result<(), SteeringError> {
        if self.coefficient <= 0.0 || !self.coefficient.is_finite() {
            return Err(SteeringError::NonPositiveCoefficient(self.coefficient));
        }
        if self.layer_start > self.layer_end {
            return Err(SteeringError::EmptyLayerRange {
                start: self.layer_start,
                end: self.layer_end,
            });
        }
        Ok(())
    }

    /// Coefficient with the direction folded in as its sign.
    pub fn signed_coefficient(&self) -> f64 {
        f64::from(self.direction.sign()) * self.coefficient
    }

    pub fn label(&self) -> String {
        let sign = match self.direction {
            Direction::Plus => '+',
            Direction::Minus => '-',
        };
        format!("{}{}", self.personality.initial(), sign)
    }
}

/// The condition a player runs under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Condition {
    Baseline,
    Steered(SteeringSpec),
}

impl Condition {
    /// Baseline followed by every trait in both directions, the order used
    /// for report rows and heatmap axes.
    pub fn standard_grid() -> Vec<Condition> {
        let mut out = vec![Condition::Baseline];
        for t in Trait::ALL {
            out.push(Condition::Steered(SteeringSpec::new(t, Direction::Plus)));
            out.push(Condition::Steered(SteeringSpec::new(t, Direction::Minus)));
        }
        out
    }

    pub fn steering(&self) -> Option<&SteeringSpec> {
        match self {
            Condition::Baseline => None,
            Condition::Steered(s) => Some(s),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Condition::Baseline => "Baseline".to_string(),
            Condition::Steered(s) => s.label(),
        }
    }

    /// Parses `Baseline`, `A+`, `c-`, ... using the given defaults for the
    /// coefficient and layer range.
    pub fn parse_label(
        label: &str,
        coefficient: f64,
        layer_start: i32,
        layer_end: i32,
    ) -> Result<Condition, SteeringError> {
        let trimmed = label.trim();
        if trimmed.eq_ignore_ascii_case("baseline") {
            return Ok(Condition::Baseline);
        }
        let mut chars = trimmed.chars();
        let (Some(initial), Some(sign), None) = (chars.next(), chars.next(), chars.next()) else {
            return Err(SteeringError::UnknownLabel(label.to_string()));
        };
        let personality =
            Trait::from_initial(initial).ok_or_else(|| SteeringError::UnknownLabel(label.to_string()))?;
        let direction = match sign {
            '+' => Direction::Plus,
            '-' | '\u{2212}' => Direction::Minus,
            _ => return Err(SteeringError::UnknownLabel(label.to_string())),
        };
        let spec = SteeringSpec::new(personality, direction)
            .with_coefficient(coefficient)
            .with_layers(layer_start, layer_end);
        spec.validate()?;
        Ok(Condition::Steered(spec))
    }

    /// Position of this condition's label in the standard grid, for sorting.
    pub fn rank(label: &str) -> usize {
        Condition::standard_grid()
            .iter()
            .position(|c| c.label() == label)
            .unwrap_or(usize::MAX)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Condition {
    type Err = SteeringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Condition::parse_label(s, DEFAULT_COEFFICIENT, DEFAULT_LAYER_START, DEFAULT_LAYER_END)
    }
}
