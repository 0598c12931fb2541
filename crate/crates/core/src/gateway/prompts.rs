use serde::{Deserialize, Serialize};

use crate::game::{history_summary_with, Action, PayoffMatrix, Perspective, RoundRecord, SetupKind};
use crate::templates::{TemplateError, TemplateSet};

/// Which answer a model call is asked for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Setup 1 (action) and Setup 2 (message and action) in one call.
    Decide,
    /// Setup 3, first call: the message only.
    Declare,
    /// Setup 3, second call: the action, after hearing the opponent.
    Act,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundContext {
    pub stage: Stage,
    /// 1-based round being decided.
    pub round: u32,
    pub rounds_total: u32,
    /// Setup 2: B's announced intent. Setup 3 (act stage): the opponent's message.
    pub opponent_intent: Option<Action>,
    /// Setup 3 (act stage): what this player announced.
    pub own_message: Option<Action>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompts {
    pub system: String,
    pub user: String,
}

fn user_key(setup: SetupKind, stage: Stage) -> String {
    match stage {
        Stage::Decide => format!("user_{}", setup.key()),
        Stage::Declare => format!("user_declare_{}", setup.key()),
        Stage::Act => format!("user_act_{}", setup.key()),
    }
}

fn years(n: u32) -> String {
    if n == 1 {
        "1 year".into()
    } else {
        format!("{n} years")
    }
}

/// Renders the system and user prompt for one model call. The user prompt
/// embeds the history summary from `role`'s perspective.
pub fn build_prompts(
    templates: &TemplateSet,
    matrix: &PayoffMatrix,
    setup: SetupKind,
    role: Perspective,
    history: &[RoundRecord],
    ctx: &RoundContext,
) -> Result<Prompts, TemplateError> {
    use Action::{Cooperate as C, Defect as D};

    // the matrix is symmetric, so A's view of it is every player's view
    let system_vars = [
        ("rounds", ctx.rounds_total.to_string()),
        ("years_cc", years(matrix.payoff(C, C).a)),
        ("years_cd_self", years(matrix.payoff(C, D).a)),
        ("years_cd_other", years(matrix.payoff(C, D).b)),
        ("years_dc_self", years(matrix.payoff(D, C).a)),
        ("years_dc_other", years(matrix.payoff(D, C).b)),
        ("years_dd", years(matrix.payoff(D, D).a)),
    ];
    let system = templates.render(&format!("system_{}", setup.key()), &system_vars)?;

    let mut user_vars = vec![
        ("round", ctx.round.to_string()),
        ("rounds", ctx.rounds_total.to_string()),
        ("history", history_summary_with(templates, history, role, setup)?),
    ];
    if let Some(intent) = ctx.opponent_intent {
        user_vars.push(("opponent_intent", intent.to_string()));
        user_vars.push(("opponent_message", intent.to_string()));
    }
    if let Some(own) = ctx.own_message {
        user_vars.push(("own_message", own.to_string()));
    }
    let user = templates.render(&user_key(setup, ctx.stage), &user_vars)?;
    Ok(Prompts { system, user })
}
