//! Iterated prisoner's dilemma tournaments between rule-based opponents and
//! personality-steered language-model agents.

pub mod game;
pub mod gateway;
pub mod metrics;
pub mod reporting;
pub mod seed;
pub mod steering;
pub mod strategies;
pub mod templates;
pub mod tournament;
