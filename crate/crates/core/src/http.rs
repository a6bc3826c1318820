//! Minimal blocking JSON-over-HTTP helper shared by the service clients.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum HttpFailure {
    /// Connection refused, reset, timed out and the like.
    Transport(String),
    Status(u16, String),
    /// 2xx response whose body is not the expected JSON.
    Decode(String),
}

impl std::fmt::Display for HttpFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HttpFailure::Transport(m) => write!(f, "transport error: {m}"),
            HttpFailure::Status(code, body) => write!(f, "HTTP {code}: {body}"),
            HttpFailure::Decode(m) => write!(f, "invalid response body: {m}"),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct JsonHttp {
    agent: ureq::Agent,
    base: String,
}

impl JsonHttp {
    pub(crate) fn new(base: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            base: base.trim_end_matches('/').to_string(),
        }
    }

    fn url(&self, path: &str) -> String {
        if path.is_empty() {
            self.base.clone()
        } else {
            format!("{}/{}", self.base, path.trim_start_matches('/'))
        }
    }

    pub(crate) fn get<R: DeserializeOwned>(&self, path: &str) -> Result<R, HttpFailure> {
        let resp = self
            .agent
            .get(&self.url(path))
            .call()
            .map_err(|e| HttpFailure::Transport(e.to_string()))?;
        Self::finish(resp)
    }

    pub(crate) fn post<B: Serialize, R: DeserializeOwned>(
        &self,
        path: &str,
        body: &B,
        bearer: Option<&str>,
    ) -> Result<R, HttpFailure> {
        let mut req = self.agent.post(&self.url(path));
        if let Some(token) = bearer {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let resp = req
            .send_json(body)
            .map_err(|e| HttpFailure::Transport(e.to_string()))?;
        Self::finish(resp)
    }

    fn finish<R: DeserializeOwned>(mut resp: ureq::http::Response<ureq::Body>) -> Result<R, HttpFailure> {
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| HttpFailure::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(HttpFailure::Status(status, text));
        }
        serde_json::from_str(&text).map_err(|e| HttpFailure::Decode(e.to_string()))
    }
}
