#![allow(dead_code)]

pub mod oracle;
pub mod stub;
pub mod synth;

use std::path::Path;

use ipd_core::steering::Condition;
use ipd_core::strategies::{OpponentSpec, ScriptPolicy};
use ipd_core::tournament::{ExperimentPlan, PlayerConfig};
use ipd_core::game::SetupKind;

/// Setup-1 plan with a scripted A: one condition per policy, against `opponents`.
pub fn scripted_setup1(policies: &[(&str, &str)], opponents: &[&str], iterations: u32, seed: u64) -> ExperimentPlan {
    let mut plan = ExperimentPlan::standard(SetupKind::Setup1, seed, PlayerConfig::scripted(ScriptPolicy::TitForTat));
    plan.conditions_a = policies.iter().map(|(c, _)| c.parse::<Condition>().unwrap()).collect();
    plan.opponents = opponents.iter().map(|o| o.parse::<OpponentSpec>().unwrap()).collect();
    plan.iterations_per_cell = iterations;
    if let PlayerConfig::Scripted { overrides, .. } = &mut plan.player_a {
        for (c, p) in policies {
            overrides.insert(c.to_string(), p.parse().unwrap());
        }
    }
    plan
}

pub fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
