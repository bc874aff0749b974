//! Chat-completion backends: an OpenAI-compatible HTTP client and offline
//! mocks that read the step prompt back.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::policy::{max_aoi_decide, nearest_neighbor_decide};
use crate::types::{Observation, SensorRow};

use super::prompt::{SPEED_PREFIX, TABLE_HEADER};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: &str, content: impl Into<String>) -> Self {
        ChatMessage {
            role: role.to_string(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    /// System message first, then the user turn and any retry turns.
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn system(&self) -> Option<&str> {
        self.messages.iter().find(|m| m.role == "system").map(|m| m.content.as_str())
    }

    /// The first user message, which carries the state table.
    pub fn user(&self) -> Option<&str> {
        self.messages.iter().find(|m| m.role == "user").map(|m| m.content.as_str())
    }

    pub fn char_count(&self) -> usize {
        self.messages.iter().map(|m| m.content.chars().count()).sum()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "model": self.model,
            "messages": self.messages,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub raw: String,
    pub latency_ms: f64,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("request timed out after {after_ms} ms")]
    Timeout { after_ms: u64 },
    #[error("endpoint returned status {status}")]
    Status { status: u16, body: String },
    #[error("malformed response body: {0}")]
    Malformed(String),
    #[error("transport error: {0}")]
    Transport(String),
}

pub trait ChatBackend: Send {
    fn name(&self) -> String;
    fn complete(&mut self, req: &ChatRequest) -> Result<ChatResponse, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MockStrategy {
    MaxAoi,
    Nearest,
    Invalid,
}

impl MockStrategy {
    pub fn label(self) -> &'static str {
        match self {
            MockStrategy::MaxAoi => "max-aoi",
            MockStrategy::Nearest => "nearest",
            MockStrategy::Invalid => "invalid",
        }
    }
}

const INVALID_REPLIES: [&str; 3] = [
    "I would rather circle once more before deciding.",
    "Sensor five looks stale, fly fast.",
    "Unable to comply: the schedule depends on factors not listed.",
];

/// Rows and speed bounds recovered from a step prompt.
pub fn parse_step_table(prompt: &str) -> Option<Observation> {
    let mut lines = prompt.lines();
    let (v_min, v_max) = prompt
        .lines()
        .find_map(|l| l.strip_prefix(SPEED_PREFIX))
        .and_then(|s| s.split_once(".."))
        .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))?;
    lines.find(|l| *l == TABLE_HEADER)?;
    let mut rows = Vec::new();
    for line in lines.take_while(|l| !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split(" | ").map(str::trim).collect();
        let [id, aoi, pl, dist, elig] = cols.as_slice() else {
            return None;
        };
        rows.push(SensorRow {
            id: id.parse().ok()?,
            aoi_s: aoi.parse().ok()?,
            distance_m: dist.parse().ok()?,
            path_loss_db: pl.parse().ok()?,
            snr_db: f64::NAN,
            queue_len: 0,
            battery_j: f64::NAN,
            eligible: match *elig {
                "yes" => true,
                "no" => false,
                _ => return None,
            },
        });
    }
    if rows.is_empty() {
        return None;
    }
    Some(Observation {
        t_s: 0.0,
        step: 0,
        steps_remaining: 0,
        uav_pos: [0.0; 3],
        v_min_mps: v_min,
        v_max_mps: v_max,
        rows,
    })
}

/// Reply of the named heuristic to a step prompt. The `calls` counter only
/// varies the wording of invalid replies.
pub fn mock_complete(strategy: MockStrategy, step_prompt: &str, calls: usize) -> String {
    let obs = match strategy {
        MockStrategy::Invalid => return INVALID_REPLIES[calls % INVALID_REPLIES.len()].to_string(),
        _ => match parse_step_table(step_prompt) {
            Some(o) => o,
            None => return "No sensor table found in the request.".to_string(),
        },
    };
    let a = match strategy {
        MockStrategy::MaxAoi => max_aoi_decide(&obs),
        MockStrategy::Nearest => nearest_neighbor_decide(&obs),
        MockStrategy::Invalid => unreachable!(),
    };
    format!("{{\"sensor\": {}, \"velocity\": {}}}", a.sensor, a.velocity_mps)
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    strategy: MockStrategy,
    calls: usize,
}

impl MockBackend {
    pub fn new(strategy: MockStrategy) -> Self {
        MockBackend { strategy, calls: 0 }
    }
}

impl ChatBackend for MockBackend {
    fn name(&self) -> String {
        format!("mock:{}", self.strategy.label())
    }

    fn complete(&mut self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let start = Instant::now();
        let raw = mock_complete(self.strategy, req.user().unwrap_or(""), self.calls);
        self.calls += 1;
        Ok(ChatResponse {
            raw,
            latency_ms: start.elapsed().as_secs_f64() * 1e3,
            prompt_tokens: None,
            completion_tokens: None,
        })
    }
}

/// First choice's message content, verbatim, plus usage counts if present.
pub fn extract_content(body: &str) -> Result<(String, Option<u64>, Option<u64>), BackendError> {
    let v: Value = serde_json::from_str(body).map_err(|e| BackendError::Malformed(e.to_string()))?;
    let content = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::Malformed("no choices[0].message.content".to_string()))?;
    let usage = |k: &str| v.pointer(&format!("/usage/{k}")).and_then(Value::as_u64);
    Ok((content.to_string(), usage("prompt_tokens"), usage("completion_tokens")))
}

/// Blocking client for `<endpoint>/v1/chat/completions`.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
    timeout: Duration,
}

impl HttpBackend {
    pub fn new(endpoint: &str, api_key: Option<String>, timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(HttpBackend {
            client,
            url: format!("{}/v1/chat/completions", endpoint.trim_end_matches('/')),
            api_key,
            timeout,
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl ChatBackend for HttpBackend {
    fn name(&self) -> String {
        "http".to_string()
    }

    fn complete(&mut self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let start = Instant::now();
        let mut builder = self
            .client
            .post(&self.url)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(req.to_json().to_string());
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let timed_out = || BackendError::Timeout {
            after_ms: self.timeout.as_millis() as u64,
        };
        let resp = builder
            .send()
            .map_err(|e| if e.is_timeout() { timed_out() } else { BackendError::Transport(e.to_string()) })?;
        let status = resp.status();
        let body = resp
            .text()
            .map_err(|e| if e.is_timeout() { timed_out() } else { BackendError::Transport(e.to_string()) })?;
        if !status.is_success() {
            return Err(BackendError::Status {
                status: status.as_u16(),
                body,
            });
        }
        let (raw, prompt_tokens, completion_tokens) = extract_content(&body)?;
        Ok(ChatResponse {
            raw,
            latency_ms: start.elapsed().as_secs_f64() * 1e3,
            prompt_tokens,
            completion_tokens,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::WorldConfig;
    use crate::icl::parse::parse_action;
    use crate::icl::prompt::build_step_prompt;
    use crate::types::Action;
    use crate::world::World;

    fn obs_with_aoi(aoi: &[f64]) -> Observation {
        let cfg = WorldConfig {
            n_sensors: aoi.len(),
            ..Default::default()
        };
        let mut w = World::new(cfg, 4).unwrap();
        for (i, &a) in aoi.iter().enumerate() {
            w.sensor_mut(i + 1).unwrap().aoi_s = a;
        }
        w.observe()
    }

    #[test]
    fn max_aoi_mock_picks_stalest() {
        let obs = obs_with_aoi(&[3.0, 9.0, 1.0]);
        let reply = mock_complete(MockStrategy::MaxAoi, &build_step_prompt(&obs, &[]), 0);
        assert_eq!(parse_action(&reply, 3, 0.0, 15.0), Ok(Action::new(2, 15.0)));
    }

    #[test]
    fn table_round_trip_recovers_exact_values() {
        let obs = obs_with_aoi(&[0.1 + 0.2, 1.0 / 3.0, 40.0, 7.25]);
        let back = parse_step_table(&build_step_prompt(&obs, &[])).unwrap();
        let got: Vec<f64> = back.rows.iter().map(|r| r.aoi_s).collect();
        let want: Vec<f64> = obs.rows.iter().map(|r| r.aoi_s).collect();
        assert_eq!(got, want);
        let got: Vec<f64> = back.rows.iter().map(|r| r.distance_m).collect();
        let want: Vec<f64> = obs.rows.iter().map(|r| r.distance_m).collect();
        assert_eq!(got, want);
        assert_eq!((back.v_min_mps, back.v_max_mps), (obs.v_min_mps, obs.v_max_mps));
    }

    #[test]
    fn nearest_mock_mirrors_rule() {
        for seed in 0..20 {
            let w = World::new(WorldConfig::default(), seed).unwrap();
            let obs = w.observe();
            let reply = mock_complete(MockStrategy::Nearest, &build_step_prompt(&obs, &[]), 0);
            assert_eq!(parse_action(&reply, 10, 0.0, 15.0), Ok(nearest_neighbor_decide(&obs)));
        }
    }

    #[test]
    fn invalid_mock_never_parses() {
        let obs = obs_with_aoi(&[1.0, 2.0]);
        for k in 0..10 {
            let reply = mock_complete(MockStrategy::Invalid, &build_step_prompt(&obs, &[]), k);
            assert!(parse_action(&reply, 2, 0.0, 15.0).is_err());
        }
    }

    #[test]
    fn content_extraction() {
        let body = r#"{"id":"x","choices":[{"index":0,"message":{"role":"assistant","content":" {\"sensor\": 2, \"velocity\": 3} "}}],"usage":{"prompt_tokens":12,"completion_tokens":5}}"#;
        let (raw, p, c) = extract_content(body).unwrap();
        assert_eq!(raw, " {\"sensor\": 2, \"velocity\": 3} ");
        assert_eq!((p, c), (Some(12), Some(5)));
        assert!(matches!(extract_content("{}"), Err(BackendError::Malformed(_))));
        assert!(matches!(extract_content("not json"), Err(BackendError::Malformed(_))));
    }

    #[test]
    fn request_json_shape() {
        let req = ChatRequest {
            model: "m".into(),
            messages: vec![ChatMessage::new("system", "s"), ChatMessage::new("user", "u")],
            temperature: 0.0,
            max_tokens: 64,
        };
        let v = req.to_json();
        assert_eq!(v["messages"][1]["role"], "user");
        assert_eq!(v["max_tokens"], 64);
        assert_eq!(req.char_count(), 2);
    }
}
