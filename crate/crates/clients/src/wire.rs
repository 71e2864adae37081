//! Request and response bodies for the two endpoint conventions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use gencp::error::BackendError;
use gencp::{Domain, DomainSource, Token};

#[derive(Debug, Clone, Serialize)]
pub struct CompletionRequest<'a> {
    pub model: &'a str,
    pub prompt: &'a str,
    pub max_tokens: u32,
    pub temperature: f64,
    pub logprobs: usize,
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    logprobs: Option<Logprobs>,
}

#[derive(Debug, Deserialize)]
struct Logprobs {
    top_logprobs: Vec<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FillMaskRequest<'a> {
    pub inputs: &'a str,
    pub parameters: FillMaskParameters,
}

#[derive(Debug, Clone, Serialize)]
pub struct FillMaskParameters {
    pub top_k: usize,
}

#[derive(Debug, Clone, Deserialize)]
struct MaskCandidate {
    score: f64,
    token_str: String,
}

fn protocol(message: impl Into<String>, raw: &str) -> BackendError {
    BackendError::Protocol {
        message: message.into(),
        raw: raw.to_string(),
    }
}

fn to_tokens(
    pairs: impl IntoIterator<Item = (String, f64)>,
    raw: &str,
) -> Result<Vec<Token>, BackendError> {
    pairs
        .into_iter()
        // an empty surface cannot be assigned to a variable
        .filter(|(s, _)| !s.is_empty())
        .map(|(s, score)| {
            if !score.is_finite() {
                return Err(protocol(format!("non-finite score for {s:?}"), raw));
            }
            Token::new(s, score).map_err(|e| protocol(e.to_string(), raw))
        })
        .collect()
}

/// Domain from the first generated position's top log-probabilities.
pub fn parse_completion(raw: &str, k: usize) -> Result<Domain, BackendError> {
    let resp: CompletionResponse =
        serde_json::from_str(raw).map_err(|e| protocol(format!("completion body: {e}"), raw))?;
    let top = resp
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.logprobs)
        .and_then(|l| l.top_logprobs.into_iter().next())
        .ok_or_else(|| protocol("response carries no top_logprobs", raw))?;
    let tokens = to_tokens(top, raw)?;
    Ok(Domain::from_candidates(tokens, DomainSource::Autoregressive, k))
}

/// One domain per mask. A single-mask response may be a flat candidate list.
/// Scores are probabilities and are stored as natural logs.
pub fn parse_fill_mask(raw: &str, masks: usize, k: usize) -> Result<Vec<Domain>, BackendError> {
    let value: Value =
        serde_json::from_str(raw).map_err(|e| protocol(format!("fill-mask body: {e}"), raw))?;
    let Value::Array(items) = value else {
        return Err(protocol("fill-mask body is not an array", raw));
    };
    let nested = items.iter().all(Value::is_array);
    let groups: Vec<Value> = if nested && !items.is_empty() {
        items
    } else {
        vec![Value::Array(items)]
    };
    if groups.len() != masks {
        return Err(protocol(
            format!("expected {masks} mask predictions, got {}", groups.len()),
            raw,
        ));
    }
    groups
        .into_iter()
        .map(|g| {
            let cands: Vec<MaskCandidate> = serde_json::from_value(g)
                .map_err(|e| protocol(format!("mask candidate: {e}"), raw))?;
            let pairs = cands
                .into_iter()
                .map(|c| (c.token_str, c.score.ln()))
                .collect::<Vec<_>>();
            Ok(Domain::from_candidates(to_tokens(pairs, raw)?, DomainSource::Masked, k))
        })
        .collect()
}
