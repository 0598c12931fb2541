//! Prompting, the sidecar call and reply parsing for model-backed players.

mod client;
mod parse;
mod prompts;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{
    build_request, decide_via_llm, ChatBackend, Expect, HealthResponse, ModelDecision, SidecarClient,
    SteeredChatRequest, SteeredChatResponse, TransportError, CORRECTIVE_SUFFIX, HEALTH_PATH, STEERED_CHAT_PATH,
};
pub use parse::{parse_decision, parse_message, render_decision, ParseError, ParsedDecision};
pub use prompts::{build_prompts, Prompts, RoundContext, Stage};

pub use crate::game::Decision;
pub use crate::steering::{Condition, Direction, SteeringSpec, Trait};

use crate::strategies::{MessagePolicy, OpponentSpec, ScriptPolicy};

pub const DEFAULT_MAX_RETRIES: u32 = 3;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("sidecar unavailable: {0}")]
    SidecarUnavailable(TransportError),
    #[error("sidecar rejected the request: {0}")]
    Rejected(TransportError),
    #[error("steering requested = {requested} but sidecar reports steering_applied = {applied}")]
    SteeringMismatch { requested: bool, applied: bool },
    #[error("no parseable reply after {attempts} attempts: {last_error}")]
    RetriesExhausted {
        attempts: u32,
        last_error: ParseError,
        outputs: Vec<String>,
    },
    #[error(transparent)]
    Template(#[from] crate::templates::TemplateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeParams {
    pub temperature: f64,
    pub max_new_tokens: u32,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            max_new_tokens: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmBinding {
    /// `None` is the unsteered baseline.
    pub steering: Option<SteeringSpec>,
    pub endpoint: String,
    pub max_retries: u32,
    pub decode: DecodeParams,
    pub retry_backoff_ms: u64,
}

impl LlmBinding {
    pub fn new(endpoint: impl Into<String>, condition: &Condition) -> Self {
        Self {
            steering: condition.steering().cloned(),
            endpoint: endpoint.into(),
            max_retries: DEFAULT_MAX_RETRIES,
            decode: DecodeParams::default(),
            retry_backoff_ms: 500,
        }
    }
}

/// How one player's decisions are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentBinding {
    Scripted { policy: ScriptPolicy, messages: MessagePolicy },
    Rule { spec: OpponentSpec },
    Llm(LlmBinding),
}

#[cfg(test)]
mod tests {
    use std::sync::Mutex;

    use super::*;
    use crate::game::Action;

    /// Replies from a fixed script; `Err` entries simulate transport failures.
    struct Scripted {
        replies: Mutex<Vec<Result<String, TransportError>>>,
        seen: Mutex<Vec<SteeredChatRequest>>,
        steering_applied: Option<bool>,
    }

    impl Scripted {
        fn new(replies: Vec<Result<&str, TransportError>>) -> Self {
            Self {
                replies: Mutex::new(replies.into_iter().rev().map(|r| r.map(str::to_string)).collect()),
                seen: Mutex::new(Vec::new()),
                steering_applied: None,
            }
        }
    }

    impl ChatBackend for Scripted {
        fn steered_chat(&self, req: &SteeredChatRequest) -> Result<SteeredChatResponse, TransportError> {
            self.seen.lock().unwrap().push(req.clone());
            let text = self.replies.lock().unwrap().pop().expect("script exhausted")?;
            Ok(SteeredChatResponse {
                text,
                model_id: "stub".into(),
                steering_applied: self.steering_applied.unwrap_or(req.personality.is_some()),
            })
        }
    }

    fn binding(condition: &Condition) -> LlmBinding {
        LlmBinding {
            retry_backoff_ms: 0,
            ..LlmBinding::new("http://unused", condition)
        }
    }

    fn prompts() -> Prompts {
        Prompts {
            system: "sys".into(),
            user: "usr".into(),
        }
    }

    #[test]
    fn single_call_when_well_formed() {
        let b = Scripted::new(vec![Ok("fine.\nACTION: defect")]);
        let d = decide_via_llm(&b, &binding(&Condition::Baseline), &prompts(), 7, Expect::Action).unwrap();
        assert_eq!(d.action, Some(Action::Defect));
        assert_eq!(d.retries, 0);
        let seen = b.seen.lock().unwrap();
        assert_eq!(seen.len(), 1);
        assert_eq!(seen[0].personality, None);
        assert_eq!(seen[0].seed, 7);
    }

    #[test]
    fn malformed_then_ok_retries_once_with_suffix() {
        let b = Scripted::new(vec![Ok("hmm"), Ok("MESSAGE: cooperate\nACTION: defect")]);
        let cond: Condition = "A+".parse().unwrap();
        let d = decide_via_llm(&b, &binding(&cond), &prompts(), 7, Expect::MessageAndAction).unwrap();
        assert_eq!((d.message, d.action, d.retries), (Some(Action::Cooperate), Some(Action::Defect), 1));
        let seen = b.seen.lock().unwrap();
        assert!(!seen[0].user.contains(CORRECTIVE_SUFFIX));
        assert!(seen[1].user.ends_with(CORRECTIVE_SUFFIX));
        assert_ne!(seen[0].seed, seen[1].seed);
        assert_eq!(seen[0].personality.as_deref(), Some("agreeableness"));
        assert_eq!(seen[0].direction.as_deref(), Some("+1"));
        assert_eq!((seen[0].coefficient, seen[0].layer_start, seen[0].layer_end), (3.5, -20, -5));
    }

    #[test]
    fn persistent_garbage_exhausts_retries() {
        let b = Scripted::new(vec![Ok("a"), Ok("b"), Ok("c"), Ok("d")]);
        let err = decide_via_llm(&b, &binding(&Condition::Baseline), &prompts(), 1, Expect::Action).unwrap_err();
        match err {
            GatewayError::RetriesExhausted { attempts, outputs, .. } => {
                assert_eq!(attempts, 4);
                assert_eq!(outputs, ["a", "b", "c", "d"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn transport_failures_become_unavailable() {
        let down = || Err(TransportError::Unreachable("refused".into()));
        let b = Scripted::new(vec![down(), down(), down(), down()]);
        let err = decide_via_llm(&b, &binding(&Condition::Baseline), &prompts(), 1, Expect::Action).unwrap_err();
        assert!(matches!(err, GatewayError::SidecarUnavailable(_)));

        let b = Scripted::new(vec![down(), Ok("ACTION: cooperate")]);
        let d = decide_via_llm(&b, &binding(&Condition::Baseline), &prompts(), 1, Expect::Action).unwrap();
        assert_eq!(d.retries, 1);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let b = Scripted::new(vec![Err(TransportError::Status {
            status: 422,
            body: "unknown trait".into(),
        })]);
        let err = decide_via_llm(&b, &binding(&Condition::Baseline), &prompts(), 1, Expect::Action).unwrap_err();
        assert!(matches!(err, GatewayError::Rejected(TransportError::Status { status: 422, .. })));
    }

    #[test]
    fn steering_flag_must_match() {
        let mut b = Scripted::new(vec![Ok("ACTION: cooperate")]);
        b.steering_applied = Some(false);
        let cond: Condition = "N-".parse().unwrap();
        let err = decide_via_llm(&b, &binding(&cond), &prompts(), 1, Expect::Action).unwrap_err();
        assert!(matches!(err, GatewayError::SteeringMismatch { requested: true, applied: false }));
    }
}
