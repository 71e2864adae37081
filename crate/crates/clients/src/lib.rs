//! HTTP backends for gencp: a completions endpoint that reports top-k
//! log-probabilities for the next token, and a fill-mask endpoint.
//!
//! Wire formats are described in `PROTOCOL.md` next to this crate.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;
use ureq::Agent;

use gencp::error::BackendError;
use gencp::lm::{LanguageModel, LeftPrompt, MaskedModel, MaskedPrompt};
use gencp::Domain;

mod config;
pub mod wire;

pub use config::{EndpointConfig, LLM_KEY_ENV, MLM_KEY_ENV};

/// Counters for one client. `requests` counts HTTP attempts, so a logical
/// call that was retried twice contributes three.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClientStats {
    pub calls: u64,
    pub requests: u64,
    pub retries: u64,
    pub cache_hits: u64,
    pub underfilled: u64,
}

#[derive(Default)]
struct Counters {
    calls: AtomicU64,
    requests: AtomicU64,
    retries: AtomicU64,
    cache_hits: AtomicU64,
    underfilled: AtomicU64,
}

impl Counters {
    fn snapshot(&self) -> ClientStats {
        let get = |a: &AtomicU64| a.load(Ordering::Relaxed);
        ClientStats {
            calls: get(&self.calls),
            requests: get(&self.requests),
            retries: get(&self.retries),
            cache_hits: get(&self.cache_hits),
            underfilled: get(&self.underfilled),
        }
    }
}

fn bump(a: &AtomicU64) {
    a.fetch_add(1, Ordering::Relaxed);
}

struct Transport {
    cfg: EndpointConfig,
    agent: Agent,
    next_slot: Mutex<Option<Instant>>,
    counters: Counters,
}

impl Transport {
    fn new(cfg: EndpointConfig) -> Result<Self, BackendError> {
        cfg.check()?;
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            cfg,
            agent,
            next_slot: Mutex::new(None),
            counters: Counters::default(),
        })
    }

    fn throttle(&self) {
        let Some(rps) = self.cfg.max_rps else { return };
        let gap = Duration::from_secs_f64(1.0 / rps);
        let wait = {
            let mut slot = self.next_slot.lock().unwrap();
            let now = Instant::now();
            let at = slot.map_or(now, |s| s.max(now));
            *slot = Some(at + gap);
            at - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }

    /// Posts `body`, retrying rate limits, server errors and transport
    /// failures with exponential backoff.
    fn post(&self, url: &str, body: &impl Serialize) -> Result<String, BackendError> {
        let key = self.cfg.api_key()?;
        let auth = format!("Bearer {key}");
        let mut attempt = 0;
        loop {
            self.throttle();
            bump(&self.counters.requests);
            let failure = match self.agent.post(url).header("Authorization", &auth).send_json(body) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    let text = resp
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| BackendError::Transient(format!("reading body: {e}")));
                    match (status, text) {
                        (200..=299, Ok(text)) => return Ok(text),
                        (429 | 500..=599, text) => {
                            format!("HTTP {status}: {}", text.unwrap_or_default())
                        }
                        (200..=299, Err(e)) => e.to_string(),
                        (_, text) => {
                            return Err(BackendError::Config(format!(
                                "HTTP {status} from {url}: {}",
                                text.unwrap_or_default()
                            )))
                        }
                    }
                }
                Err(e) => format!("transport: {e}"),
            };
            if attempt >= self.cfg.max_retries {
                return Err(BackendError::Transient(format!(
                    "{failure} (gave up after {} retries)",
                    self.cfg.max_retries
                )));
            }
            let delay = self.cfg.backoff_base_ms.saturating_mul(1 << attempt.min(16));
            log::warn!("{url}: {failure}; retrying in {delay} ms");
            thread::sleep(Duration::from_millis(delay));
            attempt += 1;
            bump(&self.counters.retries);
        }
    }

    fn log_protocol(&self, r: Result<Vec<Domain>, BackendError>) -> Result<Vec<Domain>, BackendError> {
        match r {
            Err(BackendError::Protocol { message, raw }) => {
                log::error!("malformed response from {}: {message}; payload: {raw}", self.cfg.base_url);
                Err(BackendError::Protocol { message, raw })
            }
            Ok(ds) => {
                for d in ds.iter().filter(|d| d.underfilled) {
                    bump(&self.counters.underfilled);
                    log::debug!("{} returned {} candidates, fewer than requested", self.cfg.base_url, d.len());
                }
                Ok(ds)
            }
            e => e,
        }
    }
}

type CacheKey = (String, usize, i64);

fn temperature_bucket(t: f64) -> i64 {
    (t * 100.0).round() as i64
}

/// Autoregressive backend over a completions endpoint.
pub struct HttpLanguageModel {
    transport: Transport,
    cache: Mutex<HashMap<CacheKey, Domain>>,
}

impl HttpLanguageModel {
    pub fn new(cfg: EndpointConfig) -> Result<Self, BackendError> {
        Ok(Self {
            transport: Transport::new(cfg)?,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn stats(&self) -> ClientStats {
        self.transport.counters.snapshot()
    }

    /// One request for the next-token distribution of `prompt`.
    pub fn complete_topk(&self, prompt: &str, k: usize, temperature: f64) -> Result<Domain, BackendError> {
        if k == 0 {
            return Err(BackendError::InvalidRequest("top-k must be at least 1".into()));
        }
        let t = &self.transport;
        bump(&t.counters.calls);
        let key = (prompt.to_string(), k, temperature_bucket(temperature));
        if t.cfg.cache {
            if let Some(d) = self.cache.lock().unwrap().get(&key) {
                bump(&t.counters.cache_hits);
                return Ok(d.clone());
            }
        }
        let body = wire::CompletionRequest {
            model: &t.cfg.model_name,
            prompt,
            max_tokens: 1,
            temperature,
            logprobs: k,
        };
        let raw = t.post(&t.cfg.completions_url(), &body)?;
        let d = t
            .log_protocol(wire::parse_completion(&raw, k).map(|d| vec![d]))?
            .remove(0);
        if t.cfg.cache {
            self.cache.lock().unwrap().insert(key, d.clone());
        }
        Ok(d)
    }
}

impl LanguageModel for HttpLanguageModel {
    fn next_token_domain(&self, prompt: &LeftPrompt, k: usize, temperature: f64) -> Result<Domain, BackendError> {
        self.complete_topk(&prompt.text(), k, temperature)
    }
}

/// Masked backend over a fill-mask endpoint.
pub struct HttpMaskedModel {
    transport: Transport,
    cache: Mutex<HashMap<CacheKey, Vec<Domain>>>,
}

impl HttpMaskedModel {
    pub fn new(cfg: EndpointConfig) -> Result<Self, BackendError> {
        Ok(Self {
            transport: Transport::new(cfg)?,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn stats(&self) -> ClientStats {
        self.transport.counters.snapshot()
    }

    pub fn mask_marker(&self) -> &str {
        &self.transport.cfg.mask_marker
    }

    /// One request; one domain per occurrence of the mask marker.
    pub fn fill_mask_topk(&self, masked_prompt: &str, k: usize) -> Result<Vec<Domain>, BackendError> {
        if k == 0 {
            return Err(BackendError::InvalidRequest("top-k must be at least 1".into()));
        }
        let t = &self.transport;
        let masks = masked_prompt.matches(t.cfg.mask_marker.as_str()).count();
        if masks == 0 {
            return Err(BackendError::InvalidRequest(format!(
                "prompt contains no {} marker",
                t.cfg.mask_marker
            )));
        }
        bump(&t.counters.calls);
        let key = (masked_prompt.to_string(), k, 0);
        if t.cfg.cache {
            if let Some(d) = self.cache.lock().unwrap().get(&key) {
                bump(&t.counters.cache_hits);
                return Ok(d.clone());
            }
        }
        let body = wire::FillMaskRequest {
            inputs: masked_prompt,
            parameters: wire::FillMaskParameters { top_k: k },
        };
        let raw = t.post(&t.cfg.base_url, &body)?;
        let ds = t.log_protocol(wire::parse_fill_mask(&raw, masks, k))?;
        if t.cfg.cache {
            self.cache.lock().unwrap().insert(key, ds.clone());
        }
        Ok(ds)
    }
}

impl MaskedModel for HttpMaskedModel {
    fn fill_mask_domains(&self, prompt: &MaskedPrompt, k: usize) -> Result<Vec<Domain>, BackendError> {
        self.fill_mask_topk(&prompt.text(self.mask_marker()), k)
    }
}

/// One-shot completion call with a fresh client.
pub fn complete_topk(cfg: &EndpointConfig, prompt: &str, k: usize, temperature: f64) -> Result<Domain, BackendError> {
    HttpLanguageModel::new(cfg.clone())?.complete_topk(prompt, k, temperature)
}

/// One-shot fill-mask call with a fresh client.
pub fn fill_mask_topk(cfg: &EndpointConfig, masked_prompt: &str, k: usize) -> Result<Vec<Domain>, BackendError> {
    HttpMaskedModel::new(cfg.clone())?.fill_mask_topk(masked_prompt, k)
}
