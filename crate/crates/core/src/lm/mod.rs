//! Domain-generating models: prompt construction, the backend contracts, and
//! a deterministic n-gram mock that implements both.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{BackendError, CoreError};
use crate::state::{render_text, CspState};

mod mock;

pub use mock::{build_mock, MockConfig, MockModel};

/// Mask literal used when a backend does not supply its own.
pub const DEFAULT_MASK_MARKER: &str = "[MASK]";

fn join_nonempty<'a>(parts: impl IntoIterator<Item = &'a str>) -> String {
    parts
        .into_iter()
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Context for a left-to-right next-token query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeftPrompt {
    pub preprompt: String,
    pub generated: String,
}

impl LeftPrompt {
    /// Full prompt: preprompt, separator, generated text.
    pub fn text(&self) -> String {
        join_nonempty([self.preprompt.as_str(), self.generated.as_str()])
    }
}

/// Context for a fill-mask query: `mask_count` placeholders after the
/// generated text, optionally followed by fixed right context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedPrompt {
    pub preprompt: String,
    pub generated: String,
    pub mask_count: usize,
    #[serde(default)]
    pub suffix: String,
}

impl MaskedPrompt {
    pub fn text(&self, marker: &str) -> String {
        let masks = vec![marker; self.mask_count].join(" ");
        join_nonempty([
            self.preprompt.as_str(),
            self.generated.as_str(),
            masks.as_str(),
            self.suffix.as_str(),
        ])
    }
}

pub fn build_left_prompt(state: &CspState, preprompt: &str) -> LeftPrompt {
    LeftPrompt {
        preprompt: preprompt.to_string(),
        generated: render_text(state),
    }
}

pub fn build_masked_prompt(
    state: &CspState,
    preprompt: &str,
    d: usize,
) -> Result<MaskedPrompt, CoreError> {
    if d == 0 {
        return Err(CoreError::NoMasks);
    }
    Ok(MaskedPrompt {
        preprompt: preprompt.to_string(),
        generated: render_text(state),
        mask_count: d,
        suffix: String::new(),
    })
}

/// Autoregressive backend: top-k candidates for the next token.
pub trait LanguageModel: Send + Sync {
    fn next_token_domain(
        &self,
        prompt: &LeftPrompt,
        k: usize,
        temperature: f64,
    ) -> Result<Domain, BackendError>;
}

/// Masked backend: one whole-word domain per mask, left to right.
pub trait MaskedModel: Send + Sync {
    fn fill_mask_domains(&self, prompt: &MaskedPrompt, k: usize)
        -> Result<Vec<Domain>, BackendError>;
}

impl<T: LanguageModel + ?Sized> LanguageModel for &T {
    fn next_token_domain(&self, p: &LeftPrompt, k: usize, t: f64) -> Result<Domain, BackendError> {
        (**self).next_token_domain(p, k, t)
    }
}

impl<T: MaskedModel + ?Sized> MaskedModel for &T {
    fn fill_mask_domains(&self, p: &MaskedPrompt, k: usize) -> Result<Vec<Domain>, BackendError> {
        (**self).fill_mask_domains(p, k)
    }
}

impl<T: LanguageModel + ?Sized> LanguageModel for std::sync::Arc<T> {
    fn next_token_domain(&self, p: &LeftPrompt, k: usize, t: f64) -> Result<Domain, BackendError> {
        (**self).next_token_domain(p, k, t)
    }
}

impl<T: MaskedModel + ?Sized> MaskedModel for std::sync::Arc<T> {
    fn fill_mask_domains(&self, p: &MaskedPrompt, k: usize) -> Result<Vec<Domain>, BackendError> {
        (**self).fill_mask_domains(p, k)
    }
}

pub(crate) fn check_k(k: usize) -> Result<(), BackendError> {
    if k == 0 {
        return Err(BackendError::InvalidRequest("top-k must be at least 1".into()));
    }
    Ok(())
}

/// Wraps a backend and counts invocations of each interface.
#[derive(Debug, Default)]
pub struct CallCounter<M> {
    pub inner: M,
    llm: AtomicU64,
    mlm: AtomicU64,
}

impl<M> CallCounter<M> {
    pub fn new(inner: M) -> Self {
        Self {
            inner,
            llm: AtomicU64::new(0),
            mlm: AtomicU64::new(0),
        }
    }

    pub fn llm_calls(&self) -> u64 {
        self.llm.load(Ordering::SeqCst)
    }

    pub fn mlm_calls(&self) -> u64 {
        self.mlm.load(Ordering::SeqCst)
    }
}

impl<M: LanguageModel> LanguageModel for CallCounter<M> {
    fn next_token_domain(&self, p: &LeftPrompt, k: usize, t: f64) -> Result<Domain, BackendError> {
        self.llm.fetch_add(1, Ordering::SeqCst);
        self.inner.next_token_domain(p, k, t)
    }
}

impl<M: MaskedModel> MaskedModel for CallCounter<M> {
    fn fill_mask_domains(&self, p: &MaskedPrompt, k: usize) -> Result<Vec<Domain>, BackendError> {
        self.mlm.fetch_add(1, Ordering::SeqCst);
        self.inner.fill_mask_domains(p, k)
    }
}
