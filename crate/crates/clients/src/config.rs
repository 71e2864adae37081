use serde::{Deserialize, Serialize};

use gencp::error::BackendError;

pub const LLM_KEY_ENV: &str = "GENCP_LLM_API_KEY";
pub const MLM_KEY_ENV: &str = "GENCP_MLM_API_KEY";

/// Where and how to reach one hosted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Completion endpoints get `/v1/completions` appended; fill-mask
    /// endpoints are posted to as given.
    pub base_url: String,
    pub api_key_env: String,
    pub model_name: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    /// Requests per second above which calls are spaced out. None disables the limiter.
    #[serde(default)]
    pub max_rps: Option<f64>,
    /// Cache responses per (prompt, k, temperature bucket) for this client's lifetime.
    #[serde(default)]
    pub cache: bool,
    #[serde(default = "default_marker")]
    pub mask_marker: String,
}

fn default_marker() -> String {
    gencp::lm::DEFAULT_MASK_MARKER.to_string()
}

impl EndpointConfig {
    pub fn completions(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self::new(base_url, model_name, LLM_KEY_ENV)
    }

    pub fn fill_mask(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self::new(base_url, model_name, MLM_KEY_ENV)
    }

    fn new(base_url: impl Into<String>, model_name: impl Into<String>, key_env: &str) -> Self {
        Self {
            base_url: base_url.into(),
            api_key_env: key_env.to_string(),
            model_name: model_name.into(),
            timeout_ms: 30_000,
            max_retries: 5,
            backoff_base_ms: 500,
            max_rps: None,
            cache: false,
            mask_marker: default_marker(),
        }
    }

    pub fn check(&self) -> Result<(), BackendError> {
        if self.timeout_ms == 0 {
            return Err(BackendError::Config("timeout_ms must be positive".into()));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(BackendError::Config(format!(
                "base_url {:?} is not an http(s) URL",
                self.base_url
            )));
        }
        if self.max_rps.is_some_and(|r| r.is_nan() || r <= 0.0) {
            return Err(BackendError::Config("max_rps must be positive".into()));
        }
        if self.mask_marker.is_empty() {
            return Err(BackendError::Config("mask_marker must not be empty".into()));
        }
        Ok(())
    }

    /// Reads the API key. Fails without touching the network when unset.
    pub fn api_key(&self) -> Result<String, BackendError> {
        match std::env::var(&self.api_key_env) {
            Ok(k) if !k.is_empty() => Ok(k),
            _ => Err(BackendError::Credentials(self.api_key_env.clone())),
        }
    }

    pub(crate) fn completions_url(&self) -> String {
        format!("{}/v1/completions", self.base_url.trim_end_matches('/'))
    }
}
