//! Concrete chat backends: an OpenAI-compatible HTTP client with a shared
//! token-bucket limiter, and scripted fixtures loaded from JSON.

use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use clientsim_core::gateway::{
    BackendError, ChatBackend, ChatSession, SamplingParams, ScriptedBackend, ScriptedFixture,
};
use serde_json::{json, Value};

/// Token bucket shared by every session talking to one endpoint.
#[derive(Debug)]
pub struct RateLimiter {
    capacity: f64,
    per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn new(requests_per_sec: f64, burst: u32) -> Self {
        let capacity = f64::from(burst.max(1));
        Self {
            capacity,
            per_sec: requests_per_sec.max(1e-3),
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Blocks until a token is available, then takes it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut st = self.state.lock().expect("limiter lock");
                let now = Instant::now();
                let refill = now.duration_since(st.1).as_secs_f64() * self.per_sec;
                st.0 = (st.0 + refill).min(self.capacity);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - st.0) / self.per_sec)
            };
            std::thread::sleep(wait);
        }
    }
}

/// `POST {endpoint}/chat/completions` in the OpenAI wire format.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    model: String,
    api_key: Option<String>,
    limiter: Arc<RateLimiter>,
}

impl HttpBackend {
    pub fn new(
        endpoint: &str,
        model: &str,
        api_key: Option<String>,
        timeout: Duration,
        limiter: Arc<RateLimiter>,
    ) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        let base = endpoint.trim_end_matches('/');
        let url = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        };
        Self {
            agent,
            url,
            model: model.to_string(),
            api_key,
            limiter,
        }
    }

    pub fn request_body(&self, session: &ChatSession, params: SamplingParams) -> Value {
        json!({
            "model": self.model,
            "messages": session.wire_messages(),
            "top_p": params.top_p,
            "temperature": params.temperature,
        })
    }
}

fn classify(e: ureq::Error) -> BackendError {
    match e {
        ureq::Error::StatusCode(code) if code == 429 || code >= 500 => {
            BackendError::Transient(format!("HTTP {code}"))
        }
        ureq::Error::StatusCode(code) => BackendError::Unavailable(format!("HTTP {code}")),
        ureq::Error::Timeout(_) | ureq::Error::Io(_) | ureq::Error::ConnectionFailed => {
            BackendError::Transient(e.to_string())
        }
        other => BackendError::Unavailable(other.to_string()),
    }
}

/// Pulls `choices[0].message.content` out of a completion response.
pub fn completion_text(v: &Value) -> Option<String> {
    v.pointer("/choices/0/message/content")?
        .as_str()
        .map(str::to_string)
}

impl ChatBackend for HttpBackend {
    fn chat(&self, session: &ChatSession, params: SamplingParams) -> Result<String, BackendError> {
        self.limiter.acquire();
        let mut req = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(self.request_body(session, params))
            .map_err(classify)?;
        let v: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Transient(format!("bad response body: {e}")))?;
        completion_text(&v)
            .ok_or_else(|| BackendError::Transient("response has no message content".into()))
    }
}

/// Where chat replies come from; creates one backend per session so
/// scripted cursors never leak between sessions.
#[derive(Debug, Clone)]
pub enum BackendFactory {
    Scripted(ScriptedFixture),
    Http(HttpBackend),
}

impl BackendFactory {
    /// `scripted:<fixture.json>` or an `http(s)://` base URL.
    pub fn from_spec(
        spec: &str,
        model: Option<&str>,
        timeout_secs: u64,
        requests_per_sec: f64,
    ) -> anyhow::Result<Self> {
        if let Some(path) = spec.strip_prefix("scripted:") {
            return Ok(BackendFactory::Scripted(load_fixture(Path::new(path))?));
        }
        if spec.starts_with("http://") || spec.starts_with("https://") {
            let model = model.context("an HTTP backend needs --model (or CLIENTSIM_MODEL)")?;
            let key = std::env::var("OPENAI_API_KEY")
                .ok()
                .filter(|k| !k.is_empty());
            let limiter = Arc::new(RateLimiter::new(requests_per_sec, 4));
            return Ok(BackendFactory::Http(HttpBackend::new(
                spec,
                model,
                key,
                Duration::from_secs(timeout_secs),
                limiter,
            )));
        }
        bail!("unknown backend `{spec}`; use scripted:<path> or an http(s) URL")
    }

    pub fn create(&self) -> Box<dyn ChatBackend + Send> {
        match self {
            BackendFactory::Scripted(f) => Box::new(ScriptedBackend::new(f.clone())),
            BackendFactory::Http(h) => Box::new(h.clone()),
        }
    }
}

pub fn load_fixture(path: &Path) -> anyhow::Result<ScriptedFixture> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading fixture {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing fixture {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn body_carries_sampling_and_system_prompt() {
        let b = HttpBackend::new(
            "http://localhost:1/v1/",
            "m",
            None,
            Duration::from_secs(1),
            Arc::new(RateLimiter::new(10.0, 1)),
        );
        assert_eq!(b.url, "http://localhost:1/v1/chat/completions");
        let mut s = ChatSession::new("sys");
        s.push_user("hi");
        let v = b.request_body(&s, SamplingParams::JUDGE);
        assert_eq!(v["top_p"], 0.2);
        assert_eq!(v["temperature"], 0.3);
        assert_eq!(v["messages"][0]["role"], "system");
        assert_eq!(v["messages"][1]["content"], "hi");
    }

    #[test]
    fn completion_text_extraction() {
        let v = json!({"choices": [{"message": {"role": "assistant", "content": "Client: hey"}}]});
        assert_eq!(completion_text(&v).as_deref(), Some("Client: hey"));
        assert_eq!(completion_text(&json!({})), None);
    }

    #[test]
    fn unreachable_endpoint_is_transient() {
        let b = HttpBackend::new(
            "http://127.0.0.1:9",
            "m",
            None,
            Duration::from_millis(300),
            Arc::new(RateLimiter::new(100.0, 1)),
        );
        let mut s = ChatSession::default();
        s.push_user("x");
        assert!(matches!(
            b.chat(&s, SamplingParams::JUDGE),
            Err(BackendError::Transient(_))
        ));
    }

    #[test]
    fn limiter_spaces_requests() {
        let l = RateLimiter::new(50.0, 1);
        let t = Instant::now();
        for _ in 0..4 {
            l.acquire();
        }
        assert!(t.elapsed() >= Duration::from_millis(50));
    }

    #[test]
    fn unknown_spec_is_rejected() {
        assert!(BackendFactory::from_spec("ftp://x", None, 1, 1.0).is_err());
        assert!(BackendFactory::from_spec("http://x", None, 1, 1.0).is_err());
    }
}
