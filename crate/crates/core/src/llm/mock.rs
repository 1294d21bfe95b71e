//! Scripted, deterministic backend for offline runs and tests.
//!
//! A [`MockScript`] is an ordered list of rules. The first rule whose matchers
//! all accept a request decides the reply; unmatched requests get the
//! default. Replies are templates: `{seq}` expands to the 0-based arrival
//! number of the request, `{hits}` to the 1-based hit count of the rule,
//! `{model}` to the requested model and `{user}` to the user content.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use async_trait::async_trait;
use parking_lot::Mutex;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{BackendError, BackendReply, ChatBackend, ChatRequest, LlmError};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockRule {
    pub model: Option<String>,
    pub system_prefix: Option<String>,
    pub user_contains: Option<String>,
    pub response: String,
    /// The first `n` requests hitting this rule fail with a transient error.
    pub fail_transient_n_times: u32,
    pub fail_permanent: bool,
    /// Inclusive latency range in milliseconds.
    pub latency_ms: Option<[u64; 2]>,
}

impl MockRule {
    pub fn any(response: impl Into<String>) -> Self {
        MockRule {
            response: response.into(),
            ..MockRule::default()
        }
    }

    pub fn model(mut self, model: impl Into<String>) -> Self {
        self.model = Some(model.into());
        self
    }

    pub fn system_prefix(mut self, prefix: impl Into<String>) -> Self {
        self.system_prefix = Some(prefix.into());
        self
    }

    pub fn user_contains(mut self, needle: impl Into<String>) -> Self {
        self.user_contains = Some(needle.into());
        self
    }

    pub fn fail_transient(mut self, n: u32) -> Self {
        self.fail_transient_n_times = n;
        self
    }

    pub fn fail_permanently(mut self) -> Self {
        self.fail_permanent = true;
        self
    }

    pub fn latency(mut self, min_ms: u64, max_ms: u64) -> Self {
        self.latency_ms = Some([min_ms, max_ms]);
        self
    }

    fn matches(&self, req: &ChatRequest) -> bool {
        self.model.as_deref().is_none_or(|m| m == req.model)
            && self
                .system_prefix
                .as_deref()
                .is_none_or(|p| req.system.starts_with(p))
            && self
                .user_contains
                .as_deref()
                .is_none_or(|n| req.user.contains(n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockScript {
    pub rules: Vec<MockRule>,
    pub default: String,
    /// Seed for latency sampling.
    pub seed: u64,
    /// Latency range applied when the matching rule has none.
    pub latency_ms: Option<[u64; 2]>,
}

impl Default for MockScript {
    fn default() -> Self {
        MockScript {
            rules: Vec::new(),
            default: "OK".into(),
            seed: 0,
            latency_ms: None,
        }
    }
}

impl MockScript {
    pub fn constant(response: impl Into<String>) -> Self {
        MockScript {
            default: response.into(),
            ..MockScript::default()
        }
    }

    pub fn with_rule(mut self, rule: MockRule) -> Self {
        self.rules.push(rule);
        self
    }

    pub fn with_latency(mut self, min_ms: u64, max_ms: u64, seed: u64) -> Self {
        self.latency_ms = Some([min_ms, max_ms]);
        self.seed = seed;
        self
    }

    /// Reads a script from TOML, or from JSON when the extension is `.json`.
    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Config(format!("reading mock script {}: {e}", path.display())))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| LlmError::Config(format!("parsing mock script {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MockOutcome {
    Reply(String),
    Transient,
    Permanent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapturedCall {
    pub seq: u64,
    pub rule: Option<usize>,
    pub request: ChatRequest,
    pub outcome: MockOutcome,
}

#[derive(Debug, Default)]
struct State {
    seq: u64,
    hits: Vec<u32>,
    captured: Vec<CapturedCall>,
}

#[derive(Debug)]
pub struct MockBackend {
    script: MockScript,
    state: Mutex<State>,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        let hits = vec![0; script.rules.len()];
        MockBackend {
            script,
            state: Mutex::new(State {
                hits,
                ..State::default()
            }),
            in_flight: AtomicUsize::new(0),
            peak_in_flight: AtomicUsize::new(0),
        }
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }

    /// Every request received so far, in arrival order.
    pub fn captured(&self) -> Vec<CapturedCall> {
        self.state.lock().captured.clone()
    }

    pub fn call_count(&self) -> usize {
        self.state.lock().captured.len()
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        let mut st = self.state.lock();
        st.seq = 0;
        st.captured.clear();
        st.hits.iter_mut().for_each(|h| *h = 0);
        self.peak_in_flight.store(0, Ordering::SeqCst);
    }

    fn decide(&self, req: &ChatRequest) -> (MockOutcome, Option<[u64; 2]>, u64) {
        let mut st = self.state.lock();
        let seq = st.seq;
        st.seq += 1;
        let rule_idx = self.script.rules.iter().position(|r| r.matches(req));
        let (outcome, latency) = match rule_idx {
            Some(i) => {
                st.hits[i] += 1;
                let hits = st.hits[i];
                let rule = &self.script.rules[i];
                let outcome = if rule.fail_permanent {
                    MockOutcome::Permanent
                } else if hits <= rule.fail_transient_n_times {
                    MockOutcome::Transient
                } else {
                    MockOutcome::Reply(render(&rule.response, req, seq, hits))
                };
                (outcome, rule.latency_ms.or(self.script.latency_ms))
            }
            None => (
                MockOutcome::Reply(render(&self.script.default, req, seq, 0)),
                self.script.latency_ms,
            ),
        };
        st.captured.push(CapturedCall {
            seq,
            rule: rule_idx,
            request: req.clone(),
            outcome: outcome.clone(),
        });
        (outcome, latency, seq)
    }

    fn sample_latency(&self, range: [u64; 2], seq: u64) -> Duration {
        let [lo, hi] = range;
        let mut rng = StdRng::seed_from_u64(self.script.seed ^ seq.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        Duration::from_millis(rng.gen_range(lo.min(hi)..=hi.max(lo)))
    }
}

fn render(template: &str, req: &ChatRequest, seq: u64, hits: u32) -> String {
    template
        .replace("{seq}", &seq.to_string())
        .replace("{hits}", &hits.to_string())
        .replace("{model}", &req.model)
        .replace("{user}", &req.user)
}

struct InFlight<'a>(&'a AtomicUsize);

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

#[async_trait]
impl ChatBackend for MockBackend {
    async fn send(&self, request: &ChatRequest) -> Result<BackendReply, BackendError> {
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        let _guard = InFlight(&self.in_flight);

        let (outcome, latency, seq) = self.decide(request);
        match latency {
            Some(range) => tokio::time::sleep(self.sample_latency(range, seq)).await,
            None => tokio::task::yield_now().await,
        }
        match outcome {
            MockOutcome::Reply(content) => Ok(BackendReply {
                content,
                model: request.model.clone(),
            }),
            MockOutcome::Transient => Err(BackendError::Transient(format!("mock transient failure (call {seq})"))),
            MockOutcome::Permanent => Err(BackendError::Permanent(format!("mock permanent failure (call {seq})"))),
        }
    }
}
