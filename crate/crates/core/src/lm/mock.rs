//! Word-level n-gram stand-in for both model kinds.
//!
//! Units are words and single punctuation characters. Counts are taken per
//! sentence with start padding, and probabilities use add-one smoothing over
//! the whole vocabulary. The mock conditions on the generated text only; the
//! preprompt is ignored.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_k, LanguageModel, LeftPrompt, MaskedModel, MaskedPrompt};
use crate::domain::{Domain, DomainSource};
use crate::error::BackendError;
use crate::token::{Token, SENTENCE_TERMINATORS, WORD_SEPARATOR};

type Unit = u32;

/// Sentence-start padding; never a vocabulary unit.
const START: Unit = Unit::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct MockConfig {
    /// Order of the model, 2 or 3.
    pub n: usize,
    pub seed: u64,
    /// Words at least this long may be split into two sub-word tokens.
    pub split_min_len: Option<usize>,
    /// Chance that an eligible word is split.
    pub split_prob: f64,
    /// Amplitude of a seeded, context-dependent perturbation added to every
    /// log-probability. Zero leaves the plain n-gram scores.
    pub noise: f64,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self {
            n: 2,
            seed: 0,
            split_min_len: None,
            split_prob: 0.5,
            noise: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MockModel {
    config: MockConfig,
    vocab: Vec<String>,
    index: BTreeMap<String, Unit>,
    /// context of n-1 units → (total, follower counts)
    counts: BTreeMap<Vec<Unit>, (u64, BTreeMap<Unit, u64>)>,
    /// word → (head, tail) for split words
    splits: BTreeMap<Unit, (String, String)>,
    /// head → split words sharing it
    heads: BTreeMap<String, Vec<Unit>>,
}

/// Builds a mock with default options and the given order and seed.
pub fn build_mock(corpus: &str, n: usize, seed: u64) -> Result<MockModel, BackendError> {
    MockModel::build(
        corpus,
        MockConfig {
            n,
            seed,
            ..MockConfig::default()
        },
    )
}

fn is_punct(unit: &str) -> bool {
    !unit.chars().any(char::is_alphanumeric)
}

fn is_terminal(unit: &str) -> bool {
    unit.chars().count() == 1 && unit.chars().all(|c| SENTENCE_TERMINATORS.contains(&c))
}

/// Splits text into units: each whitespace chunk yields its leading
/// punctuation characters, its alphanumeric core, and its trailing
/// punctuation characters.
pub(crate) fn units(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let first = chunk.find(char::is_alphanumeric);
        let Some(first) = first else {
            out.extend(chunk.char_indices().map(|(i, c)| &chunk[i..i + c.len_utf8()]));
            continue;
        };
        let last = chunk
            .char_indices()
            .rfind(|(_, c)| c.is_alphanumeric())
            .map_or(chunk.len(), |(i, c)| i + c.len_utf8());
        let head = &chunk[..first];
        out.extend(head.char_indices().map(|(i, c)| &head[i..i + c.len_utf8()]));
        out.push(&chunk[first..last]);
        let tail = &chunk[last..];
        out.extend(tail.char_indices().map(|(i, c)| &tail[i..i + c.len_utf8()]));
    }
    out
}

impl MockModel {
    pub fn build(corpus: &str, config: MockConfig) -> Result<Self, BackendError> {
        if !(2..=3).contains(&config.n) {
            return Err(BackendError::Config(format!(
                "mock order must be 2 or 3, got {}",
                config.n
            )));
        }
        let tokens = units(corpus);
        if tokens.is_empty() {
            return Err(BackendError::Config("mock corpus is empty".into()));
        }
        let vocab: Vec<String> = tokens
            .iter()
            .map(|s| s.to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: BTreeMap<String, Unit> = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as Unit))
            .collect();

        let order = config.n - 1;
        let mut counts: BTreeMap<Vec<Unit>, (u64, BTreeMap<Unit, u64>)> = BTreeMap::new();
        let mut history = vec![START; order];
        for t in &tokens {
            let u = index[*t];
            let ctx = history[history.len() - order..].to_vec();
            let entry = counts.entry(ctx).or_default();
            entry.0 += 1;
            *entry.1.entry(u).or_default() += 1;
            if is_terminal(t) {
                history = vec![START; order];
            } else {
                history.push(u);
            }
        }

        let mut model = Self {
            config,
            vocab,
            index,
            counts,
            splits: BTreeMap::new(),
            heads: BTreeMap::new(),
        };
        model.choose_splits();
        Ok(model)
    }

    fn choose_splits(&mut self) {
        let Some(min_len) = self.config.split_min_len else {
            return;
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        for (i, word) in self.vocab.iter().enumerate() {
            let chars: Vec<char> = word.chars().collect();
            if is_punct(word) || chars.len() < min_len.max(2) {
                continue;
            }
            if !rng.gen_bool(self.config.split_prob.clamp(0.0, 1.0)) {
                continue;
            }
            let cut = rng.gen_range(1..chars.len());
            let head: String = chars[..cut].iter().collect();
            let tail: String = chars[cut..].iter().collect();
            // a head that is also a word would make word ends ambiguous
            if self.index.contains_key(&head) {
                continue;
            }
            self.heads.entry(head.clone()).or_default().push(i as Unit);
            self.splits.insert(i as Unit, (head, tail));
        }
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn order(&self) -> usize {
        self.config.n
    }

    /// Words split into two tokens, as (word, head, tail).
    pub fn split_words(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.splits
            .iter()
            .map(|(u, (h, t))| (self.vocab[*u as usize].as_str(), h.as_str(), t.as_str()))
    }

    /// Add-one smoothed probability of `unit` after `context` (the last n-1
    /// units, start-padded). Unknown units get the unseen mass.
    pub fn probability(&self, context: &[&str], unit: &str) -> f64 {
        let ctx = self.context_ids(context);
        let u = self.index.get(unit).copied();
        self.prob_ids(&ctx, u)
    }

    fn prob_ids(&self, ctx: &[Unit], u: Option<Unit>) -> f64 {
        let v = self.vocab.len() as f64;
        let (total, follow) = match self.counts.get(ctx) {
            Some((t, f)) => (*t as f64, u.and_then(|u| f.get(&u)).copied().unwrap_or(0) as f64),
            None => (0.0, 0.0),
        };
        (follow + 1.0) / (total + v)
    }

    /// Last n-1 units of the current sentence of `context`, start-padded.
    fn context_ids(&self, context: &[&str]) -> Vec<Unit> {
        let order = self.config.n - 1;
        let sentence_start = context
            .iter()
            .rposition(|u| is_terminal(u))
            .map_or(0, |p| p + 1);
        let mut ids = vec![START; order];
        for u in &context[sentence_start..] {
            // out-of-vocabulary text maps onto an id no context was built from
            ids.push(self.index.get(*u).copied().unwrap_or(START - 1));
        }
        ids[ids.len() - order..].to_vec()
    }

    fn noise(&self, ctx: &[Unit]) -> Option<Vec<f64>> {
        if self.config.noise <= 0.0 {
            return None;
        }
        let mut h = DefaultHasher::new();
        self.config.seed.hash(&mut h);
        ctx.hash(&mut h);
        let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
        Some(
            (0..self.vocab.len())
                .map(|_| rng.gen::<f64>() * self.config.noise)
                .collect(),
        )
    }

    fn log_scores(&self, ctx: &[Unit]) -> Vec<f64> {
        let noise = self.noise(ctx);
        (0..self.vocab.len())
            .map(|i| {
                let p = self.prob_ids(ctx, Some(i as Unit)).ln();
                p + noise.as_ref().map_or(0.0, |n| n[i])
            })
            .collect()
    }

    fn word_surface(&self, u: Unit) -> String {
        let w = &self.vocab[u as usize];
        if is_punct(w) {
            w.clone()
        } else {
            format!("{WORD_SEPARATOR}{w}")
        }
    }

    fn token_surface(&self, u: Unit) -> String {
        match self.splits.get(&u) {
            Some((head, _)) => format!("{WORD_SEPARATOR}{head}"),
            None => self.word_surface(u),
        }
    }

    fn at_start(ctx: &[Unit]) -> bool {
        ctx.last() == Some(&START)
    }
}

impl LanguageModel for MockModel {
    fn next_token_domain(
        &self,
        prompt: &LeftPrompt,
        k: usize,
        _temperature: f64,
    ) -> Result<Domain, BackendError> {
        check_k(k)?;
        let mut context = units(&prompt.generated);
        let ends_in_space = prompt.generated.ends_with(char::is_whitespace);

        // a trailing split head can only be completed by one of its tails
        if let Some(last) = context.last().copied() {
            if let Some(words) = self.heads.get(last).filter(|_| !ends_in_space) {
                context.pop();
                let ctx = self.context_ids(&context);
                let scores = self.log_scores(&ctx);
                let tokens = words
                    .iter()
                    .map(|u| Token::new(self.splits[u].1.clone(), scores[*u as usize]))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| BackendError::Protocol {
                        message: e.to_string(),
                        raw: String::new(),
                    })?;
                return Ok(Domain::from_candidates(tokens, DomainSource::Mock, k));
            }
        }

        let ctx = self.context_ids(&context);
        let scores = self.log_scores(&ctx);
        let start = Self::at_start(&ctx);
        let tokens = (0..self.vocab.len())
            .filter(|i| !(start && is_punct(&self.vocab[*i])))
            .map(|i| {
                Token::new(self.token_surface(i as Unit), scores[i])
                    .expect("vocabulary units are non-empty")
            })
            .collect();
        Ok(Domain::from_candidates(tokens, DomainSource::Mock, k))
    }
}

impl MaskedModel for MockModel {
    /// Scores a mask candidate by its left-context probability times the
    /// probability of the unit to its right, when that unit is known (the
    /// first suffix unit after the last mask). Masks after the first see the
    /// previous mask's argmax as left context.
    fn fill_mask_domains(
        &self,
        prompt: &MaskedPrompt,
        k: usize,
    ) -> Result<Vec<Domain>, BackendError> {
        check_k(k)?;
        if prompt.mask_count == 0 {
            return Err(BackendError::InvalidRequest("no mask in prompt".into()));
        }
        let mut left: Vec<Unit> = Vec::new();
        let generated = units(&prompt.generated);
        let sentence_start = generated
            .iter()
            .rposition(|u| is_terminal(u))
            .map_or(0, |p| p + 1);
        for u in &generated[sentence_start..] {
            left.push(self.index.get(*u).copied().unwrap_or(START - 1));
        }
        let right = units(&prompt.suffix)
            .first()
            .map(|u| self.index.get(*u).copied());
        let order = self.config.n - 1;

        let mut out = Vec::with_capacity(prompt.mask_count);
        for m in 0..prompt.mask_count {
            let mut padded = vec![START; order];
            padded.extend(&left);
            let ctx = padded[padded.len() - order..].to_vec();
            let mut scores = self.log_scores(&ctx);
            if m + 1 == prompt.mask_count {
                if let Some(r) = right {
                    for (i, s) in scores.iter_mut().enumerate() {
                        let mut next = padded.clone();
                        next.push(i as Unit);
                        let rctx = &next[next.len() - order..];
                        *s += self.prob_ids(rctx, r).ln();
                    }
                }
            }
            let start = Self::at_start(&ctx);
            let tokens: Vec<Token> = (0..self.vocab.len())
                .filter(|i| !(start && is_punct(&self.vocab[*i])))
                .map(|i| {
                    Token::new(self.word_surface(i as Unit), scores[i])
                        .expect("vocabulary units are non-empty")
                })
                .collect();
            let domain = Domain::from_candidates(tokens, DomainSource::Masked, k);
            match domain.iter().next() {
                Some(best) => {
                    let unit = best.body();
                    let id = self.index[unit];
                    if is_terminal(unit) {
                        left.clear();
                    } else {
                        left.push(id);
                    }
                }
                None => left.push(START - 1),
            }
            out.push(domain);
        }
        Ok(out)
    }
}
