//! Extraction of the answer lines from free-form model output.
//!
//! The templates ask for labelled answers (`MESSAGE: ...`, `ACTION: ...`;
//! `DECISION:` is accepted as a synonym for `ACTION:`). The last occurrence of
//! each label wins, its slot runs to the next label or the end of the line,
//! and the slot must name exactly one of cooperate/defect. Everything before
//! the first answer label is the reasoning.

use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::game::Action;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("no {0} answer found")]
    Unparseable(&'static str),
    #[error("{0} answer names both cooperate and defect")]
    AmbiguousDecision(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedDecision {
    pub action: Action,
    pub message: Option<Action>,
    pub reasoning: String,
}

static LABEL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)[*_]*\b(message|action|decision)\b[*_\s]*:").expect("static regex"));
static TOKEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(cooperat\w*|defect\w*)").expect("static regex"));

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Message,
    Action,
}

struct Label {
    slot: Slot,
    start: usize,
    end: usize,
}

fn labels(raw: &str) -> Vec<Label> {
    LABEL
        .captures_iter(raw)
        .map(|c| {
            let whole = c.get(0).expect("group 0");
            let slot = if c[1].eq_ignore_ascii_case("message") {
                Slot::Message
            } else {
                Slot::Action
            };
            Label {
                slot,
                start: whole.start(),
                end: whole.end(),
            }
        })
        .collect()
}

/// Index of the last label of `slot`, if any.
fn last_of(labels: &[Label], slot: Slot) -> Option<usize> {
    labels.iter().rposition(|l| l.slot == slot)
}

fn slot_value(raw: &str, labels: &[Label], idx: usize, name: &'static str) -> Result<Action, ParseError> {
    let from = labels[idx].end;
    let mut to = raw[from..].find('\n').map_or(raw.len(), |n| from + n);
    if let Some(next) = labels.get(idx + 1) {
        to = to.min(next.start);
    }
    let mut found: Option<Action> = None;
    for m in TOKEN.find_iter(&raw[from..to]) {
        let a = if m.as_str().to_ascii_lowercase().starts_with("coop") {
            Action::Cooperate
        } else {
            Action::Defect
        };
        match found {
            Some(prev) if prev != a => return Err(ParseError::AmbiguousDecision(name)),
            _ => found = Some(a),
        }
    }
    found.ok_or(ParseError::Unparseable(name))
}

/// Parses the action, and the message too when `expects_message`.
pub fn parse_decision(raw: &str, expects_message: bool) -> Result<ParsedDecision, ParseError> {
    let labels = labels(raw);
    let action_idx = last_of(&labels, Slot::Action).ok_or(ParseError::Unparseable("action"))?;
    let action = slot_value(raw, &labels, action_idx, "action")?;
    let (message, first_start) = if expects_message {
        let msg_idx = last_of(&labels, Slot::Message).ok_or(ParseError::Unparseable("message"))?;
        let m = slot_value(raw, &labels, msg_idx, "message")?;
        (Some(m), labels[msg_idx].start.min(labels[action_idx].start))
    } else {
        (None, labels[action_idx].start)
    };
    Ok(ParsedDecision {
        action,
        message,
        reasoning: raw[..first_start].trim_end().to_string(),
    })
}

/// Parses a message-only answer, returning the message and the reasoning.
pub fn parse_message(raw: &str) -> Result<(Action, String), ParseError> {
    let labels = labels(raw);
    let idx = last_of(&labels, Slot::Message).ok_or(ParseError::Unparseable("message"))?;
    let m = slot_value(raw, &labels, idx, "message")?;
    Ok((m, raw[..labels[idx].start].trim_end().to_string()))
}

/// The answer format the templates request. `parse_decision` inverts it.
pub fn render_decision(reasoning: &str, message: Option<Action>, action: Action) -> String {
    let mut out = String::from(reasoning);
    if !out.is_empty() {
        out.push('\n');
    }
    if let Some(m) = message {
        out.push_str(&format!("MESSAGE: {m}\n"));
    }
    out.push_str(&format!("ACTION: {action}"));
    out
}
