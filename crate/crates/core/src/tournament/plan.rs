use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TournamentError;
use crate::game::{Counterpart, PayoffMatrix, SetupKind, DEFAULT_ROUNDS};
use crate::gateway::{AgentBinding, DecodeParams, LlmBinding, DEFAULT_MAX_RETRIES};
use crate::steering::{Condition, DEFAULT_COEFFICIENT, DEFAULT_LAYER_END, DEFAULT_LAYER_START};
use crate::strategies::{MessagePolicy, OpponentSpec, ScriptPolicy};

pub const DEFAULT_ITERATIONS_RULE_OPPONENT: u32 = 20;
pub const DEFAULT_ITERATIONS_AGENT_OPPONENT: u32 = 10;

/// How a player slot (A, or B in Setup 3) is filled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlayerConfig {
    /// A scripted policy for every condition, optionally overridden per
    /// condition label.
    Scripted {
        policy: ScriptPolicy,
        #[serde(default = "truthful")]
        messages: MessagePolicy,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        overrides: BTreeMap<String, ScriptPolicy>,
    },
    /// A model behind the sidecar, steered according to the condition.
    Llm {
        #[serde(default = "default_retries")]
        max_retries: u32,
        #[serde(default = "default_temperature")]
        temperature: f64,
        #[serde(default = "default_max_new_tokens")]
        max_new_tokens: u32,
    },
}

fn truthful() -> MessagePolicy {
    MessagePolicy::Truthful
}
fn default_retries() -> u32 {
    DEFAULT_MAX_RETRIES
}
fn default_temperature() -> f64 {
    DecodeParams::default().temperature
}
fn default_max_new_tokens() -> u32 {
    DecodeParams::default().max_new_tokens
}

impl PlayerConfig {
    pub fn scripted(policy: ScriptPolicy) -> Self {
        PlayerConfig::Scripted {
            policy,
            messages: MessagePolicy::Truthful,
            overrides: BTreeMap::new(),
        }
    }

    pub fn llm() -> Self {
        PlayerConfig::Llm {
            max_retries: DEFAULT_MAX_RETRIES,
            temperature: default_temperature(),
            max_new_tokens: default_max_new_tokens(),
        }
    }

    pub fn is_llm(&self) -> bool {
        matches!(self, PlayerConfig::Llm { .. })
    }

    /// Binding for a player running under `condition`.
    pub fn bind(&self, condition: &Condition, endpoint: &str, retry_backoff_ms: u64) -> AgentBinding {
        match self {
            PlayerConfig::Scripted {
                policy,
                messages,
                overrides,
            } => AgentBinding::Scripted {
                policy: overrides.get(&condition.label()).unwrap_or(policy).clone(),
                messages: *messages,
            },
            PlayerConfig::Llm {
                max_retries,
                temperature,
                max_new_tokens,
            } => AgentBinding::Llm(LlmBinding {
                max_retries: *max_retries,
                decode: DecodeParams {
                    temperature: *temperature,
                    max_new_tokens: *max_new_tokens,
                },
                retry_backoff_ms,
                ..LlmBinding::new(endpoint, condition)
            }),
        }
    }

    fn policies(&self) -> Vec<&ScriptPolicy> {
        match self {
            PlayerConfig::Scripted { policy, overrides, .. } => {
                std::iter::once(policy).chain(overrides.values()).collect()
            }
            PlayerConfig::Llm { .. } => Vec::new(),
        }
    }
}

/// One (condition A, opponent or condition B) combination.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: u32,
    pub condition_a: Condition,
    pub counterpart: Counterpart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub setup: SetupKind,
    pub conditions_a: Vec<Condition>,
    /// Rule-based Player B (Setups 1 and 2).
    #[serde(default)]
    pub opponents: Vec<OpponentSpec>,
    /// Agent Player B conditions (Setup 3).
    #[serde(default)]
    pub conditions_b: Vec<Condition>,
    pub iterations_per_cell: u32,
    pub rounds_per_game: u32,
    pub master_seed: u64,
    pub payoff: PayoffMatrix,
    pub player_a: PlayerConfig,
    #[serde(default)]
    pub player_b: Option<PlayerConfig>,
}

impl ExperimentPlan {
    /// The full grid for `setup` with default opponents and iteration counts.
    pub fn standard(setup: SetupKind, master_seed: u64, player_a: PlayerConfig) -> Self {
        let (opponents, conditions_b, iterations, player_b) = match setup {
            SetupKind::Setup1 => (OpponentSpec::setup1_defaults(), vec![], DEFAULT_ITERATIONS_RULE_OPPONENT, None),
            SetupKind::Setup2 => (OpponentSpec::setup2_defaults(), vec![], DEFAULT_ITERATIONS_RULE_OPPONENT, None),
            SetupKind::Setup3 => (
                vec![],
                Condition::standard_grid(),
                DEFAULT_ITERATIONS_AGENT_OPPONENT,
                Some(player_a.clone()),
            ),
        };
        Self {
            setup,
            conditions_a: Condition::standard_grid(),
            opponents,
            conditions_b,
            iterations_per_cell: iterations,
            rounds_per_game: DEFAULT_ROUNDS,
            master_seed,
            payoff: PayoffMatrix::default(),
            player_a,
            player_b,
        }
    }

    pub fn validate(&self) -> Result<(), TournamentError> {
        let bad = |m: String| Err(TournamentError::InvalidPlan(m));
        if self.conditions_a.is_empty() {
            return bad("conditions_a is empty".into());
        }
        if self.iterations_per_cell == 0 || self.rounds_per_game == 0 {
            return bad("iterations_per_cell and rounds_per_game must be positive".into());
        }
        for c in self.conditions_a.iter().chain(&self.conditions_b) {
            if let Some(s) = c.steering() {
                s.validate().map_err(|e| TournamentError::InvalidPlan(e.to_string()))?;
            }
        }
        match self.setup {
            SetupKind::Setup1 | SetupKind::Setup2 => {
                if self.opponents.is_empty() {
                    return bad(format!("{} needs at least one opponent", self.setup));
                }
                if !self.conditions_b.is_empty() || self.player_b.is_some() {
                    return bad(format!("{} has a rule-based player B; drop conditions_b/player_b", self.setup));
                }
                let wrong = self.opponents.iter().find(|o| {
                    if self.setup == SetupKind::Setup1 {
                        !o.is_rule_strategy()
                    } else {
                        !o.is_responder()
                    }
                });
                if let Some(o) = wrong {
                    return bad(format!("opponent {o} cannot play {}", self.setup));
                }
                for o in &self.opponents {
                    if let OpponentSpec::Scripted { sequence } = o {
                        if sequence.len() < self.rounds_per_game as usize {
                            return bad(format!("opponent {o} is shorter than {} rounds", self.rounds_per_game));
                        }
                    }
                }
            }
            SetupKind::Setup3 => {
                if self.conditions_b.is_empty() || self.player_b.is_none() {
                    return bad("setup3 needs conditions_b and player_b".into());
                }
                if !self.opponents.is_empty() {
                    return bad("setup3 has an agent player B; drop opponents".into());
                }
            }
        }
        for p in std::iter::once(&self.player_a).chain(&self.player_b) {
            for policy in p.policies() {
                if let ScriptPolicy::Sequence(seq) = policy {
                    if seq.len() < self.rounds_per_game as usize {
                        return bad(format!("policy {} is shorter than {} rounds", policy.label(), self.rounds_per_game));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn uses_llm(&self) -> bool {
        self.player_a.is_llm() || self.player_b.as_ref().is_some_and(PlayerConfig::is_llm)
    }

    /// Cells in row-major order: condition A outermost.
    pub fn cells(&self) -> Vec<Cell> {
        let counterparts: Vec<Counterpart> = match self.setup {
            SetupKind::Setup3 => self
                .conditions_b
                .iter()
                .map(|c| Counterpart::Agent { condition: c.clone() })
                .collect(),
            _ => self
                .opponents
                .iter()
                .map(|o| Counterpart::Rule { spec: o.clone() })
                .collect(),
        };
        let mut out = Vec::with_capacity(self.conditions_a.len() * counterparts.len());
        for a in &self.conditions_a {
            for b in &counterparts {
                out.push(Cell {
                    index: out.len() as u32,
                    condition_a: a.clone(),
                    counterpart: b.clone(),
                });
            }
        }
        out
    }

    pub fn planned_games(&self) -> usize {
        self.cells().len() * self.iterations_per_cell as usize
    }

    /// Hex SHA-256 prefix of the canonical JSON form of the plan.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("plan serializes");
        hex::encode(&Sha256::digest(&bytes)[..16])
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SteeringDefaults {
    #[serde(default = "default_coefficient")]
    coefficient: f64,
    #[serde(default = "default_layer_start")]
    layer_start: i32,
    #[serde(default = "default_layer_end")]
    layer_end: i32,
}

fn default_coefficient() -> f64 {
    DEFAULT_COEFFICIENT
}
fn default_layer_start() -> i32 {
    DEFAULT_LAYER_START
}
fn default_layer_end() -> i32 {
    DEFAULT_LAYER_END
}

impl Default for SteeringDefaults {
    fn default() -> Self {
        Self {
            coefficient: DEFAULT_COEFFICIENT,
            layer_start: DEFAULT_LAYER_START,
            layer_end: DEFAULT_LAYER_END,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PayoffConfig {
    cc: (u32, u32),
    cd: (u32, u32),
    dc: (u32, u32),
    dd: (u32, u32),
    #[serde(default)]
    allow_non_pd: bool,
}

/// The declarative plan file (TOML).
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    setup: SetupKind,
    #[serde(default)]
    master_seed: u64,
    iterations_per_cell: Option<u32>,
    rounds_per_game: Option<u32>,
    conditions_a: Option<Vec<String>>,
    opponents: Option<Vec<OpponentSpec>>,
    conditions_b: Option<Vec<String>>,
    #[serde(default)]
    steering: SteeringDefaults,
    payoff: Option<PayoffConfig>,
    endpoint: Option<String>,
    player_a: PlayerConfig,
    player_b: Option<PlayerConfig>,
}

/// A plan loaded from disk plus the runtime-only settings it carried.
#[derive(Debug, Clone)]
pub struct LoadedPlan {
    pub plan: ExperimentPlan,
    pub endpoint: Option<String>,
}

impl LoadedPlan {
    pub fn from_toml_str(text: &str) -> Result<Self, TournamentError> {
        let file: PlanFile = toml::from_str(text).map_err(|e| TournamentError::InvalidPlan(e.to_string()))?;
        let s = &file.steering;
        let parse_conditions = |labels: Option<Vec<String>>| -> Result<Vec<Condition>, TournamentError> {
            match labels {
                None => Ok(Condition::standard_grid()
                    .into_iter()
                    .map(|c| match c {
                        Condition::Steered(spec) => Condition::Steered(
                            spec.with_coefficient(s.coefficient)
                                .with_layers(s.layer_start, s.layer_end),
                        ),
                        b => b,
                    })
                    .collect()),
                Some(v) => v
                    .iter()
                    .map(|l| {
                        Condition::parse_label(l, s.coefficient, s.layer_start, s.layer_end)
                            .map_err(|e| TournamentError::InvalidPlan(e.to_string()))
                    })
                    .collect(),
            }
        };
        let mut plan = ExperimentPlan::standard(file.setup, file.master_seed, file.player_a.clone());
        plan.conditions_a = parse_conditions(file.conditions_a)?;
        if file.setup == SetupKind::Setup3 {
            plan.conditions_b = parse_conditions(file.conditions_b)?;
            plan.player_b = Some(file.player_b.unwrap_or(file.player_a));
        } else {
            if file.conditions_b.is_some() || file.player_b.is_some() {
                return Err(TournamentError::InvalidPlan(format!(
                    "{} does not take conditions_b/player_b",
                    file.setup
                )));
            }
            if let Some(o) = file.opponents {
                plan.opponents = o;
            }
        }
        if let Some(n) = file.iterations_per_cell {
            plan.iterations_per_cell = n;
        }
        if let Some(n) = file.rounds_per_game {
            plan.rounds_per_game = n;
        }
        if let Some(p) = file.payoff {
            plan.payoff = PayoffMatrix::new(p.cc, p.cd, p.dc, p.dd, p.allow_non_pd)
                .map_err(|e| TournamentError::InvalidPlan(e.to_string()))?;
        }
        plan.validate()?;
        Ok(Self {
            plan,
            endpoint: file.endpoint,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, TournamentError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }
}
