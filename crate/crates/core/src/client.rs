//! Vendor-neutral model client: a minimal chat-completion wire shape against
//! a configurable base URL, plus a deterministic scripted backend so every
//! downstream stage can run offline.
//!
//! The HTTP path retries transient failures with exponential backoff and
//! keeps in-flight requests under a configurable cap. Secrets come only from
//! environment variables named in config.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::protocol::sha256_hex;

/// Which prompt family a request belongs to; scripted fixtures key on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Decision,
    Profiling,
    OracleFirstPerson,
    OracleSecondPerson,
}

impl Role {
    pub fn label(self) -> &'static str {
        match self {
            Role::Decision => "decision",
            Role::Profiling => "profiling",
            Role::OracleFirstPerson => "oracle_first_person",
            Role::OracleSecondPerson => "oracle_second_person",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEndpoint {
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key; never the key.
    pub api_key_env: Option<String>,
    pub temperature: f64,
    pub top_p: f64,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub max_in_flight: usize,
}

impl ModelEndpoint {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> ModelEndpoint {
        ModelEndpoint {
            base_url: base_url.into(),
            model_name: model_name.into(),
            api_key_env: None,
            temperature: 0.2,
            top_p: 1.0,
            timeout_secs: 60,
            max_retries: 3,
            max_in_flight: 4,
        }
    }
}

/// One completed request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub latency_ms: u64,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    pub retries: u32,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClientError {
    #[error("transport failure after {retries} retries: {message}")]
    Transport { message: String, retries: u32 },
    #[error("endpoint names api key env var {0} but it is unset")]
    MissingApiKey(String),
    #[error("no scripted fixture or policy response for this prompt")]
    ScriptMiss,
}

/// Anything that can answer a prompt. Implementations must never mutate the
/// prompt text.
pub trait ModelBackend: Send + Sync {
    fn complete(&self, role: Role, prompt: &str) -> Result<Completion, ClientError>;
    fn model_name(&self) -> &str;
}

pub fn prompt_hash(prompt: &str) -> String {
    sha256_hex(prompt.as_bytes())
}

/// Counting semaphore for the in-flight cap.
struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Semaphore {
        Semaphore {
            permits: Mutex::new(permits.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().expect("semaphore poisoned");
        while *permits == 0 {
            permits = self.cv.wait(permits).expect("semaphore poisoned");
        }
        *permits -= 1;
        SemaphoreGuard { sem: self }
    }
}

struct SemaphoreGuard<'a> {
    sem: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.sem.permits.lock().expect("semaphore poisoned");
        *permits += 1;
        self.sem.cv.notify_one();
    }
}

/// Raw POST transport, injectable so retry and concurrency behavior are
/// testable without a network.
pub trait HttpTransport: Send + Sync {
    /// Returns (status, body) or a transport-level error message.
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &serde_json::Value,
        timeout: Duration,
    ) -> Result<(u16, String), String>;
}

struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    fn new() -> ReqwestTransport {
        ReqwestTransport {
            client: reqwest::blocking::Client::new(),
        }
    }
}

impl HttpTransport for ReqwestTransport {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &serde_json::Value,
        timeout: Duration,
    ) -> Result<(u16, String), String> {
        let mut req = self.client.post(url).json(body).timeout(timeout);
        if let Some(key) = bearer {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| e.to_string())?;
        Ok((status, text))
    }
}

type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

/// Chat-completion client over one endpoint.
pub struct HttpBackend {
    endpoint: ModelEndpoint,
    transport: Box<dyn HttpTransport>,
    semaphore: Semaphore,
    sleeper: Sleeper,
}

impl HttpBackend {
    pub fn new(endpoint: ModelEndpoint) -> HttpBackend {
        Self::with_transport(endpoint, Box::new(ReqwestTransport::new()))
    }

    pub fn with_transport(endpoint: ModelEndpoint, transport: Box<dyn HttpTransport>) -> HttpBackend {
        let cap = endpoint.max_in_flight;
        HttpBackend {
            endpoint,
            transport,
            semaphore: Semaphore::new(cap),
            sleeper: Arc::new(|d| std::thread::sleep(d)),
        }
    }

    /// Replaces the backoff sleeper; tests use this to observe delays.
    pub fn with_sleeper(mut self, sleeper: Sleeper) -> HttpBackend {
        self.sleeper = sleeper;
        self
    }

    fn request_url(&self) -> String {
        format!(
            "{}/chat/completions",
            self.endpoint.base_url.trim_end_matches('/')
        )
    }

    fn bearer(&self) -> Result<Option<String>, ClientError> {
        match &self.endpoint.api_key_env {
            None => Ok(None),
            Some(var) => match std::env::var(var) {
                Ok(v) if !v.is_empty() => Ok(Some(v)),
                _ => Err(ClientError::MissingApiKey(var.clone())),
            },
        }
    }
}

fn parse_completion_body(body: &str) -> Result<(String, Option<u64>, Option<u64>), String> {
    let v: serde_json::Value = serde_json::from_str(body).map_err(|e| e.to_string())?;
    let text = v
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .and_then(|m| m.get("content"))
        .and_then(|t| t.as_str())
        .ok_or("response body lacks choices[0].message.content")?
        .to_string();
    let usage = v.get("usage");
    let prompt_tokens = usage.and_then(|u| u.get("prompt_tokens")).and_then(|t| t.as_u64());
    let completion_tokens = usage
        .and_then(|u| u.get("completion_tokens"))
        .and_then(|t| t.as_u64());
    Ok((text, prompt_tokens, completion_tokens))
}

fn retryable_status(status: u16) -> bool {
    status == 408 || status == 429 || (500..600).contains(&status)
}

impl ModelBackend for HttpBackend {
    fn complete(&self, _role: Role, prompt: &str) -> Result<Completion, ClientError> {
        let bearer = self.bearer()?;
        let _permit = self.semaphore.acquire();
        let body = json!({
            "model": self.endpoint.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.endpoint.temperature,
            "top_p": self.endpoint.top_p,
        });
        let url = self.request_url();
        let timeout = Duration::from_secs(self.endpoint.timeout_secs);
        let started = Instant::now();
        let mut last_error = String::new();
        for attempt in 0..=self.endpoint.max_retries {
            match self
                .transport
                .post_json(&url, bearer.as_deref(), &body, timeout)
            {
                Ok((status, text)) if (200..300).contains(&status) => {
                    match parse_completion_body(&text) {
                        Ok((content, prompt_tokens, completion_tokens)) => {
                            return Ok(Completion {
                                text: content,
                                latency_ms: started.elapsed().as_millis() as u64,
                                prompt_tokens,
                                completion_tokens,
                                retries: attempt,
                            });
                        }
                        Err(e) => last_error = format!("malformed body: {e}"),
                    }
                }
                Ok((status, text)) if retryable_status(status) => {
                    last_error = format!("http {status}: {}", text.chars().take(200).collect::<String>());
                }
                Ok((status, text)) => {
                    return Err(ClientError::Transport {
                        message: format!(
                            "http {status} (not retryable): {}",
                            text.chars().take(200).collect::<String>()
                        ),
                        retries: attempt,
                    });
                }
                Err(e) => last_error = e,
            }
            if attempt < self.endpoint.max_retries {
                (self.sleeper)(Duration::from_millis(250u64 << attempt));
            }
        }
        Err(ClientError::Transport {
            message: last_error,
            retries: self.endpoint.max_retries,
        })
    }

    fn model_name(&self) -> &str {
        &self.endpoint.model_name
    }
}

type PolicyFn = Arc<dyn Fn(Role, &str) -> Option<String> + Send + Sync>;

/// Offline backend: exact fixtures keyed by (role, prompt hash), with an
/// optional policy callback for prompts without a fixture. Fixture lookups
/// are pure, so identical keys always yield byte-identical responses; policy
/// determinism is the policy author's contract (seeded rng streams).
pub struct ScriptedBackend {
    name: String,
    fixtures: Mutex<BTreeMap<(Role, String), String>>,
    policy: Option<PolicyFn>,
    calls: AtomicU32,
}

impl ScriptedBackend {
    pub fn new(name: impl Into<String>) -> ScriptedBackend {
        ScriptedBackend {
            name: name.into(),
            fixtures: Mutex::new(BTreeMap::new()),
            policy: None,
            calls: AtomicU32::new(0),
        }
    }

    pub fn with_policy(mut self, policy: PolicyFn) -> ScriptedBackend {
        self.policy = Some(policy);
        self
    }

    /// Registers the exact response for a (role, prompt) pair.
    pub fn stub(&self, role: Role, prompt: &str, response: impl Into<String>) {
        self.stub_hash(role, &prompt_hash(prompt), response);
    }

    /// Registers a response by precomputed prompt hash.
    pub fn stub_hash(&self, role: Role, hash: &str, response: impl Into<String>) {
        self.fixtures
            .lock()
            .expect("fixtures poisoned")
            .insert((role, hash.to_string()), response.into());
    }

    pub fn calls(&self) -> u32 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl ModelBackend for ScriptedBackend {
    fn complete(&self, role: Role, prompt: &str) -> Result<Completion, ClientError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let key = (role, prompt_hash(prompt));
        if let Some(text) = self
            .fixtures
            .lock()
            .expect("fixtures poisoned")
            .get(&key)
            .cloned()
        {
            return Ok(Completion {
                text,
                latency_ms: 0,
                prompt_tokens: None,
                completion_tokens: None,
                retries: 0,
            });
        }
        if let Some(policy) = &self.policy {
            if let Some(text) = policy(role, prompt) {
                return Ok(Completion {
                    text,
                    latency_ms: 0,
                    prompt_tokens: None,
                    completion_tokens: None,
                    retries: 0,
                });
            }
        }
        Err(ClientError::ScriptMiss)
    }

    fn model_name(&self) -> &str {
        &self.name
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicI32;

    struct FlakyTransport {
        failures_left: AtomicI32,
        calls: AtomicU32,
    }

    impl HttpTransport for FlakyTransport {
        fn post_json(
            &self,
            _url: &str,
            _bearer: Option<&str>,
            _body: &serde_json::Value,
            _timeout: Duration,
        ) -> Result<(u16, String), String> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if self.failures_left.fetch_sub(1, Ordering::SeqCst) > 0 {
                return Err("connection reset".to_string());
            }
            Ok((
                200,
                r#"{"choices":[{"message":{"content":"ok"}}],"usage":{"prompt_tokens":7,"completion_tokens":3}}"#
                    .to_string(),
            ))
        }
    }

    fn endpoint() -> ModelEndpoint {
        ModelEndpoint::new("http://unit.test/v1", "test-model")
    }

    #[test]
    fn defaults_follow_the_config_table() {
        let e = endpoint();
        assert_eq!(e.temperature, 0.2);
        assert_eq!(e.top_p, 1.0);
    }

    #[test]
    fn two_transient_failures_then_success_reports_two_retries() {
        let sleeps: Arc<Mutex<Vec<u64>>> = Arc::new(Mutex::new(Vec::new()));
        let sleeps_rec = Arc::clone(&sleeps);
        let backend = HttpBackend::with_transport(
            endpoint(),
            Box::new(FlakyTransport {
                failures_left: AtomicI32::new(2),
                calls: AtomicU32::new(0),
            }),
        )
        .with_sleeper(Arc::new(move |d| {
            sleeps_rec.lock().unwrap().push(d.as_millis() as u64)
        }));
        let c = backend.complete(Role::Decision, "hello").unwrap();
        assert_eq!(c.text, "ok");
        assert_eq!(c.retries, 2);
        assert_eq!(c.prompt_tokens, Some(7));
        assert_eq!(*sleeps.lock().unwrap(), vec![250, 500], "exponential backoff");
    }

    #[test]
    fn exhausted_retries_surface_a_transport_error_with_no_text() {
        let backend = HttpBackend::with_transport(
            endpoint(),
            Box::new(FlakyTransport {
                failures_left: AtomicI32::new(100),
                calls: AtomicU32::new(0),
            }),
        )
        .with_sleeper(Arc::new(|_| {}));
        match backend.complete(Role::Decision, "hello") {
            Err(ClientError::Transport { retries, .. }) => assert_eq!(retries, 3),
            other => panic!("expected transport error, got {other:?}"),
        }
    }

    struct RejectingTransport;

    impl HttpTransport for RejectingTransport {
        fn post_json(
            &self,
            _url: &str,
            _bearer: Option<&str>,
            _body: &serde_json::Value,
            _timeout: Duration,
        ) -> Result<(u16, String), String> {
            Ok((401, "bad key".to_string()))
        }
    }

    #[test]
    fn non_retryable_status_fails_immediately() {
        let backend =
            HttpBackend::with_transport(endpoint(), Box::new(RejectingTransport)).with_sleeper(
                Arc::new(|_| panic!("must not back off on a non-retryable status")),
            );
        match backend.complete(Role::Decision, "x") {
            Err(ClientError::Transport { retries, message }) => {
                assert_eq!(retries, 0);
                assert!(message.contains("401"));
            }
            other => panic!("expected transport error, got {other:?}"),
        }
    }

    struct SlowCountingTransport {
        in_flight: Arc<AtomicI32>,
        peak: Arc<AtomicI32>,
    }

    impl HttpTransport for SlowCountingTransport {
        fn post_json(
            &self,
            _url: &str,
            _bearer: Option<&str>,
            _body: &serde_json::Value,
            _timeout: Duration,
        ) -> Result<(u16, String), String> {
            let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(15));
            self.in_flight.fetch_sub(1, Ordering::SeqCst);
            Ok((200, r#"{"choices":[{"message":{"content":"ok"}}]}"#.to_string()))
        }
    }

    #[test]
    fn in_flight_requests_never_exceed_the_cap() {
        let in_flight = Arc::new(AtomicI32::new(0));
        let peak = Arc::new(AtomicI32::new(0));
        let mut ep = endpoint();
        ep.max_in_flight = 3;
        let backend = Arc::new(HttpBackend::with_transport(
            ep,
            Box::new(SlowCountingTransport {
                in_flight: Arc::clone(&in_flight),
                peak: Arc::clone(&peak),
            }),
        ));
        std::thread::scope(|scope| {
            for _ in 0..12 {
                let b = Arc::clone(&backend);
                scope.spawn(move || b.complete(Role::Decision, "x").unwrap());
            }
        });
        let observed = peak.load(Ordering::SeqCst);
        assert!(
            (1..=3).contains(&observed),
            "peak in-flight was {observed}, cap is 3"
        );
    }

    #[test]
    fn missing_api_key_env_is_a_typed_error() {
        let mut ep = endpoint();
        ep.api_key_env = Some("GLASSTABLE_TEST_KEY_THAT_IS_UNSET".to_string());
        let backend = HttpBackend::with_transport(
            ep,
            Box::new(FlakyTransport {
                failures_left: AtomicI32::new(0),
                calls: AtomicU32::new(0),
            }),
        );
        assert_eq!(
            backend.complete(Role::Decision, "x").unwrap_err(),
            ClientError::MissingApiKey("GLASSTABLE_TEST_KEY_THAT_IS_UNSET".to_string())
        );
    }

    #[test]
    fn prompt_is_never_mutated_by_the_client() {
        let prompt = "immutable prompt {with} braces".to_string();
        let before = prompt_hash(&prompt);
        let backend = ScriptedBackend::new("scripted");
        backend.stub(Role::Decision, &prompt, "resp");
        let _ = backend.complete(Role::Decision, &prompt);
        assert_eq!(prompt_hash(&prompt), before);
    }

    #[test]
    fn scripted_fixture_returns_exact_bytes_every_time() {
        let backend = ScriptedBackend::new("scripted");
        backend.stub(Role::Profiling, "prompt A", "fixture \u{00b1} bytes");
        for _ in 0..3 {
            let c = backend.complete(Role::Profiling, "prompt A").unwrap();
            assert_eq!(c.text, "fixture \u{00b1} bytes");
            assert_eq!(c.latency_ms, 0);
        }
        assert_eq!(
            backend.complete(Role::Decision, "prompt A").unwrap_err(),
            ClientError::ScriptMiss,
            "fixtures are role-scoped"
        );
    }

    #[test]
    fn policy_callback_answers_unstubbed_prompts() {
        let backend = ScriptedBackend::new("scripted").with_policy(Arc::new(|role, prompt| {
            Some(format!("{}:{}", role.label(), prompt.len()))
        }));
        let c = backend.complete(Role::OracleFirstPerson, "12345").unwrap();
        assert_eq!(c.text, "oracle_first_person:5");
    }
}
