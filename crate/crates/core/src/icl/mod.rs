//! Language-model controller: a fixed task description, a per-step state
//! prompt with retrieved past decisions, strict reply parsing, bounded
//! retries and a max-AoI fallback.

pub mod backend;
pub mod parse;
pub mod pool;
pub mod prompt;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::WorldConfig;
use crate::features::FeatureVector;
use crate::policy::{max_aoi_decide, Policy};
use crate::rng::RngStream;
use crate::types::{clamp_velocity, Action, Observation, StepRecord};

pub use backend::{
    extract_content, mock_complete, parse_step_table, BackendError, ChatBackend, ChatMessage, ChatRequest,
    ChatResponse, HttpBackend, MockBackend, MockStrategy,
};
pub use parse::{parse_action, ParseError};
pub use pool::{record_feedback, retrieve_examples, similarity, ExperiencePool, ExperienceRecord, DEFAULT_POOL_CAPACITY};
pub use prompt::{build_step_prompt, build_system_prompt, corrective_line, output_grammar, TaskDescription};

/// Environment variable holding the endpoint credential.
pub const API_KEY_VAR: &str = "FRSICL_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Http,
    Mock(MockStrategy),
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendKind::Http => f.write_str("http"),
            BackendKind::Mock(s) => write!(f, "mock:{}", s.label()),
        }
    }
}

impl FromStr for BackendKind {
    type Err = IclError;

    fn from_str(s: &str) -> Result<Self, IclError> {
        Ok(match s {
            "http" => BackendKind::Http,
            "mock:max-aoi" => BackendKind::Mock(MockStrategy::MaxAoi),
            "mock:nearest" => BackendKind::Mock(MockStrategy::Nearest),
            "mock:invalid" => BackendKind::Mock(MockStrategy::Invalid),
            other => return Err(IclError::UnknownBackend(other.to_string())),
        })
    }
}

impl Serialize for BackendKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BackendKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error)]
pub enum IclError {
    #[error("unknown backend `{0}` (expected http, mock:max-aoi, mock:nearest or mock:invalid)")]
    UnknownBackend(String),
    #[error("invalid icl config: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IclConfig {
    pub endpoint: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub max_retries: usize,
    pub timeout_s: f64,
    pub max_tokens: u32,
    pub top_k_examples: usize,
    pub pool_capacity: usize,
    pub backend: BackendKind,
}

impl Default for IclConfig {
    fn default() -> Self {
        IclConfig {
            endpoint: None,
            model: "gpt-4o-mini".to_string(),
            temperature: 0.0,
            max_retries: 2,
            timeout_s: 10.0,
            max_tokens: 64,
            top_k_examples: 4,
            pool_capacity: DEFAULT_POOL_CAPACITY,
            backend: BackendKind::Http,
        }
    }
}

impl IclConfig {
    pub fn validate(&self) -> Result<(), IclError> {
        let bad = |m: &str| Err(IclError::Config(m.to_string()));
        if self.top_k_examples > self.pool_capacity {
            return bad("top_k_examples exceeds pool_capacity");
        }
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return bad("timeout_s must be positive");
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be non-negative");
        }
        Ok(())
    }

    /// Builds the configured backend; `api_key` is only used over HTTP.
    pub fn make_backend(&self, api_key: Option<String>) -> Result<Box<dyn ChatBackend>, IclError> {
        self.validate()?;
        if self.backend == BackendKind::Http && self.endpoint.as_deref().is_none_or(str::is_empty) {
            return Err(IclError::Config(
                "the http backend needs an endpoint (set --llm-endpoint, or use --mock-llm <strategy> offline)".into(),
            ));
        }
        Ok(match self.backend {
            BackendKind::Http => Box::new(HttpBackend::new(
                self.endpoint.as_deref().unwrap_or_default(),
                api_key,
                Duration::from_secs_f64(self.timeout_s),
            )?),
            BackendKind::Mock(s) => Box::new(MockBackend::new(s)),
        })
    }
}

/// One backend call with its outcome, kept verbatim for the audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmExchange {
    pub step: usize,
    pub attempt: usize,
    pub request: ChatRequest,
    pub response: Option<ChatResponse>,
    pub error: Option<String>,
    /// `ok` or the parse/backend error tag.
    pub parse_result: String,
    pub latency_ms: f64,
}

/// Flat audit-log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeLogLine {
    pub step: usize,
    pub attempt: usize,
    pub request_chars: usize,
    pub raw_response: Option<String>,
    pub parse_result: String,
    pub latency_ms: f64,
}

impl From<&LlmExchange> for ExchangeLogLine {
    fn from(x: &LlmExchange) -> Self {
        ExchangeLogLine {
            step: x.step,
            attempt: x.attempt,
            request_chars: x.request.char_count(),
            raw_response: x.response.as_ref().map(|r| r.raw.clone()),
            parse_result: x.parse_result.clone(),
            latency_ms: x.latency_ms,
        }
    }
}

/// How the action for a step was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionTrace {
    pub attempts: usize,
    pub fell_back: bool,
}

pub struct IclPolicy {
    cfg: IclConfig,
    world: WorldConfig,
    system_prompt: String,
    backend: Box<dyn ChatBackend>,
    pool: ExperiencePool,
    exchanges: Vec<LlmExchange>,
    fallbacks: usize,
    decisions: usize,
    last: Option<DecisionTrace>,
}

impl IclPolicy {
    pub fn new(cfg: IclConfig, world: WorldConfig, backend: Box<dyn ChatBackend>) -> Result<Self, IclError> {
        cfg.validate()?;
        Ok(IclPolicy {
            system_prompt: build_system_prompt(&world),
            pool: ExperiencePool::new(cfg.pool_capacity),
            cfg,
            world,
            backend,
            exchanges: Vec::new(),
            fallbacks: 0,
            decisions: 0,
            last: None,
        })
    }

    /// Builds the backend named in `cfg`.
    pub fn from_config(cfg: IclConfig, world: WorldConfig, api_key: Option<String>) -> Result<Self, IclError> {
        let backend = cfg.make_backend(api_key)?;
        Self::new(cfg, world, backend)
    }

    pub fn config(&self) -> &IclConfig {
        &self.cfg
    }

    pub fn system_prompt(&self) -> &str {
        &self.system_prompt
    }

    pub fn pool(&self) -> &ExperiencePool {
        &self.pool
    }

    pub fn pool_mut(&mut self) -> &mut ExperiencePool {
        &mut self.pool
    }

    pub fn exchanges(&self) -> &[LlmExchange] {
        &self.exchanges
    }

    pub fn take_exchanges(&mut self) -> Vec<LlmExchange> {
        std::mem::take(&mut self.exchanges)
    }

    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    pub fn decisions(&self) -> usize {
        self.decisions
    }

    pub fn last_decision(&self) -> Option<DecisionTrace> {
        self.last
    }

    fn features(&self, obs: &Observation) -> FeatureVector {
        FeatureVector::from_observation(obs, &self.world)
    }

    /// Total: always returns an in-range action.
    pub fn icl_decide(&mut self, obs: &Observation) -> Action {
        let n = obs.n_sensors();
        let (lo, hi) = (obs.v_min_mps, obs.v_max_mps);
        let examples = retrieve_examples(&self.pool, &self.features(obs), self.cfg.top_k_examples);
        let mut messages = vec![
            ChatMessage::new("system", self.system_prompt.clone()),
            ChatMessage::new("user", build_step_prompt(obs, &examples)),
        ];
        self.decisions += 1;
        for attempt in 0..=self.cfg.max_retries {
            let req = ChatRequest {
                model: self.cfg.model.clone(),
                messages: messages.clone(),
                temperature: self.cfg.temperature,
                max_tokens: self.cfg.max_tokens,
            };
            let started = std::time::Instant::now();
            let outcome = self.backend.complete(&req);
            let latency_ms = started.elapsed().as_secs_f64() * 1e3;
            let (parsed, reason) = match &outcome {
                Ok(resp) => match parse_action(&resp.raw, n, lo, hi) {
                    Ok(a) => (Some(a), "ok".to_string()),
                    Err(e) => (None, e.tag().to_string()),
                },
                Err(BackendError::Timeout { .. }) => (None, "timeout".to_string()),
                Err(BackendError::Status { .. }) => (None, "http-status".to_string()),
                Err(BackendError::Malformed(_)) => (None, "malformed-body".to_string()),
                Err(BackendError::Transport(_)) => (None, "transport".to_string()),
            };
            let (response, error) = match outcome {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            if let Some(a) = parsed {
                self.exchanges.push(LlmExchange {
                    step: obs.step,
                    attempt,
                    request: req,
                    response,
                    error,
                    parse_result: reason,
                    latency_ms,
                });
                self.last = Some(DecisionTrace {
                    attempts: attempt + 1,
                    fell_back: false,
                });
                return a;
            }
            if let Some(r) = &response {
                messages.push(ChatMessage::new("assistant", r.raw.clone()));
            }
            messages.push(ChatMessage::new("user", corrective_line(&reason, n, lo, hi)));
            self.exchanges.push(LlmExchange {
                step: obs.step,
                attempt,
                request: req,
                response,
                error,
                parse_result: reason,
                latency_ms,
            });
        }
        self.fallbacks += 1;
        self.last = Some(DecisionTrace {
            attempts: self.cfg.max_retries + 1,
            fell_back: true,
        });
        let a = max_aoi_decide(obs);
        Action::new(a.sensor, clamp_velocity(a.velocity_mps, lo, hi))
    }
}

impl Policy for IclPolicy {
    fn name(&self) -> &str {
        "icl"
    }

    fn decide(&mut self, obs: &Observation, _rng: &mut RngStream) -> Action {
        self.icl_decide(obs)
    }

    fn after_step(&mut self, obs: &Observation, record: &StepRecord) {
        let f = self.features(obs);
        record_feedback(&mut self.pool, f, record.action, record.avg_aoi_s, record.step);
    }
}
