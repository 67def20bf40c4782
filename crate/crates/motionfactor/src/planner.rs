//! Optional remote planner speaking the chat-completion JSON shape.
//!
//! The endpoint is asked for a motion graph or a scene layout as JSON; the
//! first fenced JSON block of the reply is parsed and validated. Failures
//! are retried a bounded number of times and then, if allowed, replaced by
//! the local parser / layout planner.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use motionfactor_core::graph::MotionGraph;
use motionfactor_core::layout::{plan_layout, PlannerConfig, SceneLayout};
use motionfactor_core::lexicon::Lexicon;
use motionfactor_core::parser::parse_prompt;
use serde::Deserialize;
use serde_json::json;

use crate::json::{GraphDoc, LayoutDoc, RepairNote};

pub const ENV_BASE_URL: &str = "PLANNER_BASE_URL";
pub const ENV_API_KEY: &str = "PLANNER_API_KEY";
pub const ENV_MODEL: &str = "PLANNER_MODEL";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlannerError {
    #[error("planner configuration: {0}")]
    Config(String),
    #[error("planner request timed out")]
    Timeout,
    #[error("planner transport failure: {0}")]
    TransportFailure(String),
    #[error("planner reply violates the schema: {0}")]
    SchemaViolation(String),
    #[error("{0}")]
    Precondition(String),
    #[error("local fallback failed after {cause}: {message}")]
    FallbackFailed { cause: Box<PlannerError>, message: String },
}

#[derive(Clone, PartialEq)]
pub struct PlannerEndpointConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub fallback_enabled: bool,
}

impl fmt::Debug for PlannerEndpointConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlannerEndpointConfig")
            .field("base_url", &self.base_url)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("model", &self.model)
            .field("timeout", &self.timeout)
            .field("max_retries", &self.max_retries)
            .field("fallback_enabled", &self.fallback_enabled)
            .finish()
    }
}

impl PlannerEndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: None,
            model: model.into(),
            timeout: Duration::from_secs(30),
            max_retries: 2,
            fallback_enabled: true,
        }
    }

    /// Reads `PLANNER_BASE_URL`, `PLANNER_API_KEY` and `PLANNER_MODEL`.
    pub fn from_env() -> Result<Self, PlannerError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, PlannerError> {
        let base_url = lookup(ENV_BASE_URL)
            .filter(|v| !v.trim().is_empty())
            .ok_or_else(|| PlannerError::Config(format!("{ENV_BASE_URL} is not set")))?;
        let model = lookup(ENV_MODEL).filter(|v| !v.trim().is_empty()).unwrap_or_else(|| "default".into());
        let mut config = Self::new(base_url, model);
        config.api_key = lookup(ENV_API_KEY).filter(|v| !v.is_empty());
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        if self.timeout.is_zero() {
            return Err(PlannerError::Config("timeout must be positive".into()));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(PlannerError::Config(format!("base URL {:?} is not http(s)", self.base_url)));
        }
        Ok(())
    }

    pub fn endpoint_url(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpRequest {
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl HttpRequest {
    /// Headers with credentials masked, for logs.
    pub fn redacted_headers(&self) -> Vec<(String, String)> {
        self.headers
            .iter()
            .map(|(k, v)| {
                if k.eq_ignore_ascii_case("authorization") {
                    (k.clone(), "Bearer <redacted>".into())
                } else {
                    (k.clone(), v.clone())
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    Timeout,
    Failure(String),
}

impl From<TransportError> for PlannerError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::Timeout => Self::Timeout,
            TransportError::Failure(m) => Self::TransportFailure(m),
        }
    }
}

/// Sends one request and returns the response body.
pub trait Transport: Send + Sync {
    fn send(&self, request: &HttpRequest, timeout: Duration) -> Result<String, TransportError>;
}

#[derive(Debug, Default)]
pub struct HttpTransport;

impl Transport for HttpTransport {
    fn send(&self, request: &HttpRequest, timeout: Duration) -> Result<String, TransportError> {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        let mut call = agent.post(&request.url);
        for (k, v) in &request.headers {
            call = call.header(k, v);
        }
        match call.send(request.body.as_str()) {
            Ok(mut response) => {
                response.body_mut().read_to_string().map_err(|e| TransportError::Failure(e.to_string()))
            }
            Err(ureq::Error::Timeout(_)) => Err(TransportError::Timeout),
            Err(ureq::Error::StatusCode(code)) => Err(TransportError::Failure(format!("HTTP status {code}"))),
            Err(e) => Err(TransportError::Failure(e.to_string())),
        }
    }
}

/// Replays canned responses in order and records every request.
#[derive(Debug, Default)]
pub struct RecordedTransport {
    replies: Mutex<VecDeque<Result<String, TransportError>>>,
    requests: Mutex<Vec<HttpRequest>>,
}

#[derive(Debug, Deserialize)]
struct FixtureFile {
    replies: Vec<FixtureReply>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum FixtureReply {
    Body { body: serde_json::Value },
    Raw { raw: String },
    Error { error: String },
}

impl RecordedTransport {
    pub fn new(replies: impl IntoIterator<Item = Result<String, TransportError>>) -> Self {
        Self { replies: Mutex::new(replies.into_iter().collect()), requests: Mutex::default() }
    }

    /// Loads `{"replies": [...]}` where each reply is `{"body": <json>}`,
    /// `{"raw": "<text>"}` or `{"error": "timeout" | "<message>"}`.
    pub fn from_fixture(path: impl AsRef<Path>) -> Result<Self, PlannerError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PlannerError::Config(format!("cannot read fixture {}: {e}", path.display())))?;
        let file: FixtureFile = serde_json::from_str(&text)
            .map_err(|e| PlannerError::Config(format!("bad fixture {}: {e}", path.display())))?;
        Ok(Self::new(file.replies.into_iter().map(|r| match r {
            FixtureReply::Body { body } => Ok(body.to_string()),
            FixtureReply::Raw { raw } => Ok(raw),
            FixtureReply::Error { error } if error == "timeout" => Err(TransportError::Timeout),
            FixtureReply::Error { error } => Err(TransportError::Failure(error)),
        })))
    }

    pub fn requests(&self) -> Vec<HttpRequest> {
        self.requests.lock().expect("request log poisoned").clone()
    }
}

impl Transport for RecordedTransport {
    fn send(&self, request: &HttpRequest, _timeout: Duration) -> Result<String, TransportError> {
        self.requests.lock().expect("request log poisoned").push(request.clone());
        self.replies
            .lock()
            .expect("reply queue poisoned")
            .pop_front()
            .unwrap_or_else(|| Err(TransportError::Failure("no recorded reply left".into())))
    }
}

/// A planner result, possibly produced by the local fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct Planned<T> {
    pub value: T,
    /// Why the remote answer was not used, when the fallback ran.
    pub fallback: Option<PlannerError>,
    pub repairs: Vec<RepairNote>,
    pub attempts: u32,
}

impl<T> Planned<T> {
    pub fn fallback_used(&self) -> bool {
        self.fallback.is_some()
    }
}

const GRAPH_INSTRUCTIONS: &str = "\
You turn a video prompt into a motion graph. List every described instance as a node with the \
predicate phrases that describe its motion and one category: \"motionless\" (static), \"rigid\" \
(moves as a whole, shape unchanged) or \"nonrigid\" (deforms: dancing, waving, fighting). Add a \
directed edge for each pairwise relation: kind \"spatial\" for static arrangements (next to, on top \
of), \"dynamic\" for relations that involve motion (pass by, move toward). Reply with a single \
```json fenced block matching this schema and nothing else:";

const GRAPH_SCHEMA: &str = r#"{"nodes":[{"id":0,"noun":"car","attributes":["parked"],"category":"motionless|rigid|nonrigid","hint":{"speed":"slow|medium|fast","oscillation":"none|sway|wave|pulse|stride|jump","direction":"none|left|right|up|down"}}],"edges":[{"src":0,"dst":1,"kind":"spatial|dynamic","phrase":"next to","placement":"left-of|right-of|above|below|near|toward|away"}]}"#;

const LAYOUT_INSTRUCTIONS: &str = "\
You plan bounding-box trajectories for a video. The canvas is the unit square, x to the right and \
y downward; a box is [x_min, y_min, x_max, y_max]. Give every node of the motion graph one track \
with exactly one box per frame. Motionless tracks keep the same box; rigid tracks translate without \
resizing; nonrigid tracks stay in place while their sides move independently. Reply with a single \
```json fenced block matching this schema and nothing else:";

const LAYOUT_SCHEMA: &str = r#"{"frames":8,"tracks":[{"id":0,"category":"rigid","boxes":[[0.1,0.4,0.4,0.7]]}]}"#;

/// The first fenced block (```json or bare ```), or the whole text when
/// there is no fence.
pub fn extract_json_block(content: &str) -> &str {
    let Some(open) = content.find("```") else {
        return content.trim();
    };
    let rest = &content[open + 3..];
    // Skip an info string such as `json` on the fence line.
    let body = match rest.find('\n') {
        Some(nl) if rest[..nl].trim().chars().all(|c| c.is_ascii_alphanumeric()) => &rest[nl + 1..],
        _ => rest,
    };
    match body.find("```") {
        Some(close) => body[..close].trim(),
        None => body.trim(),
    }
}

fn message_content(body: &str) -> Result<String, PlannerError> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| PlannerError::SchemaViolation(format!("reply is not JSON: {e}")))?;
    value["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| PlannerError::SchemaViolation("reply has no choices[0].message.content".into()))
}

pub struct PlannerClient<T: Transport> {
    config: PlannerEndpointConfig,
    transport: T,
}

impl PlannerClient<HttpTransport> {
    pub fn http(config: PlannerEndpointConfig) -> Result<Self, PlannerError> {
        Self::new(config, HttpTransport)
    }
}

impl<T: Transport> PlannerClient<T> {
    pub fn new(config: PlannerEndpointConfig, transport: T) -> Result<Self, PlannerError> {
        config.validate()?;
        Ok(Self { config, transport })
    }

    pub fn config(&self) -> &PlannerEndpointConfig {
        &self.config
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    fn request(&self, instructions: &str, schema: &str, user: String) -> HttpRequest {
        let body = json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": format!("{instructions}\n{schema}")},
                {"role": "user", "content": user},
            ],
        });
        let mut headers = vec![("Content-Type".to_string(), "application/json".to_string())];
        if let Some(key) = &self.config.api_key {
            headers.push(("Authorization".into(), format!("Bearer {key}")));
        }
        HttpRequest { url: self.config.endpoint_url(), headers, body: body.to_string() }
    }

    /// Sends until a reply parses, at most `max_retries + 1` times.
    fn exchange<V>(
        &self,
        request: &HttpRequest,
        parse: impl Fn(&str) -> Result<V, PlannerError>,
    ) -> (Result<V, PlannerError>, u32) {
        let mut last = PlannerError::TransportFailure("no attempt made".into());
        for attempt in 1..=self.config.max_retries + 1 {
            log::debug!(
                "planner request {attempt} to {} headers {:?} body {}",
                request.url,
                request.redacted_headers(),
                request.body
            );
            let outcome =
                self.transport.send(request, self.config.timeout).map_err(PlannerError::from).and_then(|body| {
                    log::debug!("planner reply {attempt}: {body}");
                    parse(&message_content(&body)?)
                });
            match outcome {
                Ok(v) => return (Ok(v), attempt),
                Err(e) => {
                    log::warn!("planner attempt {attempt} failed: {e}");
                    last = e;
                }
            }
        }
        (Err(last), self.config.max_retries + 1)
    }

    /// Asks the endpoint for a motion graph, falling back to the local
    /// parser when allowed.
    pub fn request_graph(&self, prompt: &str, lexicon: &Lexicon) -> Result<Planned<MotionGraph>, PlannerError> {
        if prompt.trim().is_empty() {
            return Err(PlannerError::Precondition("prompt is empty".into()));
        }
        let request = self.request(GRAPH_INSTRUCTIONS, GRAPH_SCHEMA, prompt.to_string());
        let (outcome, attempts) = self.exchange(&request, |content| {
            let doc: GraphDoc = serde_json::from_str(extract_json_block(content))
                .map_err(|e| PlannerError::SchemaViolation(e.to_string()))?;
            let mut graph = doc.into_graph().map_err(|e| PlannerError::SchemaViolation(e.to_string()))?;
            if graph.nodes.is_empty() {
                return Err(PlannerError::SchemaViolation("graph has no nodes".into()));
            }
            graph.source_prompt = prompt.to_string();
            Ok(graph)
        });
        match outcome {
            Ok(value) => Ok(Planned { value, fallback: None, repairs: Vec::new(), attempts }),
            Err(cause) if self.config.fallback_enabled => {
                log::warn!("planner unavailable ({cause}); using the local parser");
                let value = parse_prompt(prompt, lexicon).map_err(|e| PlannerError::FallbackFailed {
                    cause: Box::new(cause.clone()),
                    message: e.to_string(),
                })?;
                Ok(Planned { value, fallback: Some(cause), repairs: Vec::new(), attempts })
            }
            Err(cause) => Err(cause),
        }
    }

    /// Asks the endpoint for a layout of `graph` over `frames` frames.
    /// Invalid boxes are repaired and reported; anything else that fails
    /// validation falls back to the local planner when allowed.
    pub fn request_layout(
        &self,
        graph: &MotionGraph,
        frames: usize,
        planner: &PlannerConfig,
    ) -> Result<Planned<SceneLayout>, PlannerError> {
        if frames == 0 {
            return Err(PlannerError::Precondition("frame count must be at least 1".into()));
        }
        let issues = graph.validate();
        if !issues.is_empty() {
            return Err(PlannerError::Precondition(format!("invalid graph: {issues:?}")));
        }
        let user = format!("frames: {frames}\nmotion graph:\n{}", crate::json::graph_to_json(graph));
        let request = self.request(LAYOUT_INSTRUCTIONS, LAYOUT_SCHEMA, user);
        let (outcome, attempts) = self.exchange(&request, |content| {
            let doc: LayoutDoc = serde_json::from_str(extract_json_block(content))
                .map_err(|e| PlannerError::SchemaViolation(e.to_string()))?;
            let (layout, repairs) =
                doc.into_layout_repaired().map_err(|e| PlannerError::SchemaViolation(e.to_string()))?;
            check_layout_matches(&layout, graph, frames)?;
            Ok((layout, repairs))
        });
        match outcome {
            Ok((value, repairs)) => {
                for note in &repairs {
                    log::warn!("track {} frame {}: repaired box ({:?})", note.track, note.frame, note.repairs);
                }
                Ok(Planned { value, fallback: None, repairs, attempts })
            }
            Err(cause) if self.config.fallback_enabled => {
                log::warn!("planner layout unavailable ({cause}); using the local planner");
                let value = plan_layout(graph, frames, planner).map_err(|e| PlannerError::FallbackFailed {
                    cause: Box::new(cause.clone()),
                    message: e.to_string(),
                })?;
                Ok(Planned { value, fallback: Some(cause), repairs: Vec::new(), attempts })
            }
            Err(cause) => Err(cause),
        }
    }
}

fn check_layout_matches(layout: &SceneLayout, graph: &MotionGraph, frames: usize) -> Result<(), PlannerError> {
    if layout.frames != frames {
        return Err(PlannerError::SchemaViolation(format!("layout has {} frames, asked for {frames}", layout.frames)));
    }
    for node in &graph.nodes {
        let track = layout
            .track(node.id)
            .ok_or_else(|| PlannerError::SchemaViolation(format!("no track for node {}", node.id)))?;
        if track.category != node.category {
            return Err(PlannerError::SchemaViolation(format!(
                "track {} is {} but node is {}",
                node.id, track.category, node.category
            )));
        }
    }
    if layout.tracks.len() != graph.nodes.len() {
        return Err(PlannerError::SchemaViolation("layout has tracks for unknown nodes".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chat(content: &str) -> String {
        json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
    }

    fn client(replies: Vec<Result<String, TransportError>>, fallback: bool) -> PlannerClient<RecordedTransport> {
        let mut config = PlannerEndpointConfig::new("http://planner.invalid/v1", "test-model");
        config.api_key = Some("sk-secret".into());
        config.max_retries = 1;
        config.fallback_enabled = fallback;
        PlannerClient::new(config, RecordedTransport::new(replies)).unwrap()
    }

    #[test]
    fn extracts_fenced_block() {
        assert_eq!(extract_json_block("sure:\n```json\n{\"a\":1}\n```\nbye"), "{\"a\":1}");
        assert_eq!(extract_json_block("```\n[1]\n```"), "[1]");
        assert_eq!(extract_json_block("  {\"b\":2} "), "{\"b\":2}");
        assert_eq!(extract_json_block("```json\n{\"a\":1}\n```\n```json\n{\"a\":2}\n```"), "{\"a\":1}");
    }

    #[test]
    fn env_config() {
        let vars = |k: &str| match k {
            ENV_BASE_URL => Some("https://example.test/v1/".to_string()),
            ENV_API_KEY => Some("k".to_string()),
            _ => None,
        };
        let c = PlannerEndpointConfig::from_lookup(vars).unwrap();
        assert_eq!(c.endpoint_url(), "https://example.test/v1/chat/completions");
        assert_eq!(c.model, "default");
        assert!(!format!("{c:?}").contains("\"k\""));
        assert!(PlannerEndpointConfig::from_lookup(|_| None).is_err());
    }

    #[test]
    fn retries_then_succeeds() {
        let graph = r#"```json
{"nodes":[{"id":0,"noun":"car","attributes":["driving"],"category":"rigid"}],"edges":[]}
```"#;
        let c = client(vec![Ok(chat("no json here")), Ok(chat(graph))], false);
        let planned = c.request_graph("a car driving", &Lexicon::builtin()).unwrap();
        assert!(!planned.fallback_used());
        assert_eq!(planned.attempts, 2);
        assert_eq!(planned.value.nodes[0].noun_phrase, "car");
        let requests = c.transport().requests();
        assert_eq!(requests.len(), 2);
        assert!(requests[0].redacted_headers().iter().all(|(_, v)| !v.contains("sk-secret")));
        assert!(!requests[0].body.contains("sk-secret"));
    }

    #[test]
    fn falls_back_on_malformed_reply() {
        let c = client(vec![Ok("{not json".into()), Ok(chat("```json\n{]\n```"))], true);
        let planned = c.request_graph("a parked car next to a tree", &Lexicon::builtin()).unwrap();
        assert!(planned.fallback_used());
        assert!(matches!(planned.fallback, Some(PlannerError::SchemaViolation(_))));
        assert_eq!(planned.value.nodes.len(), 2);
    }

    #[test]
    fn transport_failure_without_fallback() {
        let c = client(vec![Err(TransportError::Failure("refused".into())), Err(TransportError::Timeout)], false);
        assert_eq!(c.request_graph("a car", &Lexicon::builtin()), Err(PlannerError::Timeout));
        let c = client(vec![Err(TransportError::Failure("refused".into())); 2], false);
        assert!(matches!(c.request_graph("a car", &Lexicon::builtin()), Err(PlannerError::TransportFailure(_))));
    }

    #[test]
    fn layout_repairs_reversed_box() {
        let graph = parse_prompt("a car driving", &Lexicon::builtin()).unwrap();
        let layout = r#"```json
{"frames":2,"tracks":[{"id":0,"category":"rigid","boxes":[[0.4,0.1,0.1,0.4],[0.2,0.1,0.5,0.4]]}]}
```"#;
        let c = client(vec![Ok(chat(layout))], false);
        let planned = c.request_layout(&graph, 2, &PlannerConfig::default()).unwrap();
        assert_eq!(planned.value.tracks[0].boxes[0].to_array(), [0.1, 0.1, 0.4, 0.4]);
        assert_eq!(planned.repairs.len(), 1);
        assert!(matches!(c.request_layout(&graph, 0, &PlannerConfig::default()), Err(PlannerError::Precondition(_))));
    }

    #[test]
    fn layout_with_wrong_frame_count_falls_back() {
        let graph = parse_prompt("a car driving", &Lexicon::builtin()).unwrap();
        let layout =
            "```json\n{\"frames\":1,\"tracks\":[{\"id\":0,\"category\":\"rigid\",\"boxes\":[[0.1,0.1,0.4,0.4]]}]}\n```";
        let c = client(vec![Ok(chat(layout)), Ok(chat(layout))], true);
        let planned = c.request_layout(&graph, 4, &PlannerConfig::default()).unwrap();
        assert!(planned.fallback_used());
        assert_eq!(planned.value.frames, 4);
    }
}
