//! Wire protocol to the steering sidecar and the retrying model call.

use std::thread;
use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::parse::{parse_decision, parse_message, ParseError};
use super::prompts::Prompts;
use super::{GatewayError, LlmBinding};
use crate::game::Action;
use crate::seed::derive_seed;
use crate::steering::{DEFAULT_LAYER_END, DEFAULT_LAYER_START};

pub const STEERED_CHAT_PATH: &str = "/v1/steered-chat";
pub const HEALTH_PATH: &str = "/healthz";

/// Appended to the user prompt when a reply could not be parsed.
pub const CORRECTIVE_SUFFIX: &str = "\n\nYour previous reply did not end with the requested answer line(s). \
Reply again and finish with the answer in exactly the requested format, using only the word \
\"cooperate\" or \"defect\" after each label.";

/// Body of `POST /v1/steered-chat`. Baseline requests carry `trait: null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeredChatRequest {
    pub system: String,
    pub user: String,
    #[serde(rename = "trait")]
    pub personality: Option<String>,
    pub direction: Option<String>,
    pub coefficient: f64,
    pub layer_start: i32,
    pub layer_end: i32,
    pub seed: u64,
    pub max_new_tokens: u32,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SteeredChatResponse {
    pub text: String,
    pub model_id: String,
    pub steering_applied: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub model_id: String,
    #[serde(default)]
    pub traits_loaded: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("cannot reach sidecar: {0}")]
    Unreachable(String),
    #[error("sidecar answered HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed sidecar response: {0}")]
    Decode(String),
}

impl TransportError {
    fn is_transient(&self) -> bool {
        match self {
            TransportError::Unreachable(_) => true,
            TransportError::Status { status, .. } => *status >= 500,
            TransportError::Decode(_) => false,
        }
    }
}

/// Something that can answer a steered chat request.
pub trait ChatBackend: Send + Sync {
    fn steered_chat(&self, request: &SteeredChatRequest) -> Result<SteeredChatResponse, TransportError>;
}

/// HTTP client for a running sidecar.
#[derive(Clone)]
pub struct SidecarClient {
    base: String,
    agent: ureq::Agent,
}

impl SidecarClient {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base: endpoint.trim_end_matches('/').to_string(),
            agent,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.base
    }

    pub fn health(&self) -> Result<HealthResponse, TransportError> {
        let mut resp = self
            .agent
            .get(format!("{}{HEALTH_PATH}", self.base))
            .call()
            .map_err(|e| TransportError::Unreachable(e.to_string()))?;
        let status = resp.status().as_u16();
        if status != 200 {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(TransportError::Status { status, body });
        }
        resp.body_mut()
            .read_json()
            .map_err(|e| TransportError::Decode(e.to_string()))
    }
}

impl ChatBackend for SidecarClient {
    fn steered_chat(&self, request: &SteeredChatRequest) -> Result<SteeredChatResponse, TransportError> {
        let mut resp = self
            .agent
            .post(format!("{}{STEERED_CHAT_PATH}", self.base))
            .send_json(request)
            .map_err(|e| TransportError::Unreachable(e.to_string()))?;
        let status = resp.status().as_u16();
        if status != 200 {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(TransportError::Status { status, body });
        }
        resp.body_mut()
            .read_json()
            .map_err(|e| TransportError::Decode(e.to_string()))
    }
}

/// Which answer slots the reply must contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expect {
    Action,
    MessageAndAction,
    Message,
}

/// A parsed model reply together with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDecision {
    pub action: Option<Action>,
    pub message: Option<Action>,
    pub reasoning: String,
    /// Verbatim text of the reply that was accepted.
    pub raw: String,
    pub retries: u32,
    pub model_id: String,
    pub steering_applied: bool,
}

pub fn build_request(binding: &LlmBinding, prompts: &Prompts, user: String, seed: u64) -> SteeredChatRequest {
    let steering = binding.steering.as_ref();
    SteeredChatRequest {
        system: prompts.system.clone(),
        user,
        personality: steering.map(|s| s.personality.wire_name().to_string()),
        direction: steering.map(|s| s.direction.wire_value().to_string()),
        coefficient: steering.map_or(0.0, |s| s.coefficient),
        layer_start: steering.map_or(DEFAULT_LAYER_START, |s| s.layer_start),
        layer_end: steering.map_or(DEFAULT_LAYER_END, |s| s.layer_end),
        seed,
        max_new_tokens: binding.decode.max_new_tokens,
        temperature: binding.decode.temperature,
    }
}

fn parse(raw: &str, expect: Expect) -> Result<(Option<Action>, Option<Action>, String), ParseError> {
    match expect {
        Expect::Action => parse_decision(raw, false).map(|p| (Some(p.action), None, p.reasoning)),
        Expect::MessageAndAction => parse_decision(raw, true).map(|p| (Some(p.action), p.message, p.reasoning)),
        Expect::Message => parse_message(raw).map(|(m, r)| (None, Some(m), r)),
    }
}

/// Sends the prompts to the sidecar and parses the reply.
///
/// Makes at most `1 + max_retries` calls. An unparseable reply is retried with
/// [`CORRECTIVE_SUFFIX`] appended; a transport failure or 5xx is retried after
/// a backoff. Retries after the first call use a seed derived from
/// `decode_seed` and the attempt number.
pub fn decide_via_llm(
    backend: &dyn ChatBackend,
    binding: &LlmBinding,
    prompts: &Prompts,
    decode_seed: u64,
    expect: Expect,
) -> Result<ModelDecision, GatewayError> {
    let mut last_parse: Option<ParseError> = None;
    let mut last_transport: Option<TransportError> = None;
    let mut rejected_outputs = Vec::new();

    for attempt in 0..=binding.max_retries {
        if attempt > 0 && last_transport.is_some() && binding.retry_backoff_ms > 0 {
            thread::sleep(Duration::from_millis(binding.retry_backoff_ms * u64::from(attempt)));
        }
        let user = if last_parse.is_some() {
            format!("{}{CORRECTIVE_SUFFIX}", prompts.user)
        } else {
            prompts.user.clone()
        };
        let seed = if attempt == 0 {
            decode_seed
        } else {
            derive_seed(decode_seed, 0, u64::from(attempt))
        };
        let request = build_request(binding, prompts, user, seed);

        let response = match backend.steered_chat(&request) {
            Ok(r) => r,
            Err(e) if e.is_transient() => {
                warn!("sidecar call failed (attempt {}): {e}", attempt + 1);
                last_transport = Some(e);
                continue;
            }
            Err(e) => return Err(GatewayError::Rejected(e)),
        };
        last_transport = None;

        if response.steering_applied != binding.steering.is_some() {
            return Err(GatewayError::SteeringMismatch {
                requested: binding.steering.is_some(),
                applied: response.steering_applied,
            });
        }

        match parse(&response.text, expect) {
            Ok((action, message, reasoning)) => {
                return Ok(ModelDecision {
                    action,
                    message,
                    reasoning,
                    raw: response.text,
                    retries: attempt,
                    model_id: response.model_id,
                    steering_applied: response.steering_applied,
                });
            }
            Err(e) => {
                debug!("unparseable reply (attempt {}): {e}", attempt + 1);
                rejected_outputs.push(response.text);
                last_parse = Some(e);
            }
        }
    }

    match (last_transport, last_parse) {
        (Some(e), _) => Err(GatewayError::SidecarUnavailable(e)),
        (None, Some(e)) => Err(GatewayError::RetriesExhausted {
            attempts: binding.max_retries + 1,
            last_error: e,
            outputs: rejected_outputs,
        }),
        (None, None) => unreachable!("loop runs at least once"),
    }
}
