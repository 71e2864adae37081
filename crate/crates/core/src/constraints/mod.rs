//! Declarative constraints, their propagators, and the full-text validator.
//!
//! Propagators are pure functions of a state snapshot and a candidate domain.
//! They only remove candidates and keep the relative order of survivors.
//! The validator in [`validate`] re-reads finished text from scratch and
//! shares no code with the propagators.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::state::CspState;

mod char_sum;
mod lexical;
pub mod sum;
pub mod validate;
mod word_count;

pub use char_sum::propagate_char_sum;
pub(crate) use char_sum::{follow_range, words_window};
pub use lexical::{propagate_lexical, word_core};
pub use validate::{validate_solution, ValidationReport, Violation};
pub use word_count::propagate_word_count;

/// Which sentences a constraint governs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentenceScope {
    All,
    Sentence(usize),
}

impl SentenceScope {
    pub fn covers(self, sentence: usize) -> bool {
        match self {
            SentenceScope::All => true,
            SentenceScope::Sentence(s) => s == sentence,
        }
    }
}

impl fmt::Display for SentenceScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SentenceScope::All => write!(f, "all"),
            SentenceScope::Sentence(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintSpec {
    /// Rendered character count of each covered sentence lies in
    /// `[target_min, target_max]`; an exact target has both equal.
    CharSum {
        scope: SentenceScope,
        target_min: usize,
        target_max: usize,
    },
    WordCount {
        scope: SentenceScope,
        min: usize,
        max: Option<usize>,
    },
    SentenceCount {
        n: usize,
    },
    /// The first word of `sentence` equals `keyword` (case-sensitive,
    /// trailing punctuation ignored).
    PrefixKeyword {
        sentence: usize,
        keyword: String,
    },
    /// Whole-word, case-insensitive ban.
    ForbiddenWords {
        words: BTreeSet<String>,
    },
    /// Case-insensitive ban on characters.
    LetterExclusion {
        letters: BTreeSet<char>,
    },
}

impl ConstraintSpec {
    pub fn char_sum_exact(scope: SentenceScope, target: usize) -> Self {
        ConstraintSpec::CharSum {
            scope,
            target_min: target,
            target_max: target,
        }
    }

    pub fn forbidden_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        ConstraintSpec::ForbiddenWords {
            words: words.into_iter().map(str::to_string).collect(),
        }
    }

    pub fn letter_exclusion(letters: impl IntoIterator<Item = char>) -> Self {
        ConstraintSpec::LetterExclusion {
            letters: letters.into_iter().collect(),
        }
    }

    /// Stable identifier used in violation records.
    pub fn id(&self) -> String {
        match self {
            ConstraintSpec::CharSum { scope, .. } => format!("char_sum[{scope}]"),
            ConstraintSpec::WordCount { scope, .. } => format!("word_count[{scope}]"),
            ConstraintSpec::SentenceCount { .. } => "sentence_count".to_string(),
            ConstraintSpec::PrefixKeyword { sentence, .. } => format!("prefix_keyword[{sentence}]"),
            ConstraintSpec::ForbiddenWords { .. } => "forbidden_words".to_string(),
            ConstraintSpec::LetterExclusion { .. } => "letter_exclusion".to_string(),
        }
    }

    /// Checks the field invariants.
    pub fn check(&self) -> Result<(), String> {
        match self {
            ConstraintSpec::CharSum {
                target_min,
                target_max,
                ..
            } if target_min > target_max => Err(format!(
                "char_sum target_min {target_min} exceeds target_max {target_max}"
            )),
            ConstraintSpec::WordCount {
                min, max: Some(max), ..
            } if min > max => Err(format!("word_count min {min} exceeds max {max}")),
            ConstraintSpec::SentenceCount { n: 0 } => Err("sentence_count n must be >= 1".into()),
            ConstraintSpec::PrefixKeyword { keyword, .. } if keyword.is_empty() => {
                Err("prefix_keyword keyword must be non-empty".into())
            }
            _ => Ok(()),
        }
    }

    /// True when the constraint restricts tokens of `sentence`.
    pub fn applies_to(&self, sentence: usize) -> bool {
        match self {
            ConstraintSpec::CharSum { scope, .. } | ConstraintSpec::WordCount { scope, .. } => {
                scope.covers(sentence)
            }
            ConstraintSpec::PrefixKeyword { sentence: s, .. } => *s == sentence,
            ConstraintSpec::ForbiddenWords { .. } | ConstraintSpec::LetterExclusion { .. } => true,
            ConstraintSpec::SentenceCount { .. } => false,
        }
    }
}

/// Admissible character-cost window `[lower, upper]` for the next token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropagationBounds {
    pub lower: usize,
    pub upper: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult {
    pub filtered: Domain,
    pub wiped_out: bool,
    pub bounds_used: Option<PropagationBounds>,
}

impl PropagationResult {
    pub(crate) fn new(filtered: Domain, bounds_used: Option<PropagationBounds>) -> Self {
        Self {
            wiped_out: filtered.is_empty(),
            filtered,
            bounds_used,
        }
    }
}

/// Knobs of the character-sum reasoning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharSumPolicy {
    /// Cheapest possible word: separator plus one letter.
    pub min_word_cost: usize,
    /// Cost of the token that closes a sentence (a terminal punctuation mark).
    pub closing_cost: usize,
    /// Longest word assumed when bounding growth under a word-count maximum.
    pub max_word_len: usize,
    pub count_spaces: bool,
}

impl Default for CharSumPolicy {
    fn default() -> Self {
        Self {
            min_word_cost: 2,
            closing_cost: 1,
            max_word_len: 20,
            count_spaces: true,
        }
    }
}

impl CharSumPolicy {
    pub(crate) fn tail_word_cost(&self) -> usize {
        if self.count_spaces {
            self.min_word_cost.max(1)
        } else {
            self.min_word_cost.saturating_sub(1).max(1)
        }
    }
}

/// Intersection of the char-sum windows covering the current sentence.
pub fn active_char_sum(state: &CspState) -> Option<(usize, usize)> {
    state
        .constraints
        .iter()
        .filter_map(|c| match c {
            ConstraintSpec::CharSum {
                scope,
                target_min,
                target_max,
            } if scope.covers(state.sentence_index) => Some((*target_min, *target_max)),
            _ => None,
        })
        .reduce(|(a, b), (c, d)| (a.max(c), b.min(d)))
}

/// Tightest word-count window covering the current sentence.
pub fn active_word_window(state: &CspState) -> Option<(usize, Option<usize>)> {
    let mut found: Option<(usize, Option<usize>)> = None;
    for c in &state.constraints {
        if let ConstraintSpec::WordCount { scope, min, max } = c {
            if scope.covers(state.sentence_index) {
                let (lo, hi) = found.unwrap_or((0, None));
                let hi = match (hi, *max) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                };
                found = Some((lo.max(*min), hi));
            }
        }
    }
    found
}

/// Runs every propagator applicable to the current sentence, in declaration order.
pub fn propagate_all(
    state: &CspState,
    candidate: &Domain,
    future_lengths: Option<&[BTreeSet<usize>]>,
    policy: &CharSumPolicy,
) -> PropagationResult {
    let mut current = candidate.clone();
    let mut bounds = None;
    for spec in &state.constraints {
        if !spec.applies_to(state.sentence_index) {
            continue;
        }
        let r = match spec {
            ConstraintSpec::CharSum {
                target_min,
                target_max,
                ..
            } => propagate_char_sum(
                state,
                &current,
                future_lengths,
                *target_min,
                *target_max,
                policy,
            ),
            ConstraintSpec::WordCount { min, max, .. } => {
                propagate_word_count(state, &current, *min, *max)
            }
            ConstraintSpec::SentenceCount { .. } => continue,
            lexical => propagate_lexical(state, &current, lexical),
        };
        if r.bounds_used.is_some() {
            bounds = r.bounds_used;
        }
        current = r.filtered;
        if current.is_empty() {
            break;
        }
    }
    PropagationResult::new(current, bounds)
}

/// A whole word proposed for a future position of the current sentence.
#[derive(Debug, Clone, Copy)]
pub struct FutureWord<'a> {
    pub sentence: usize,
    /// 0-based word index within the sentence.
    pub word_index: usize,
    pub word: &'a str,
    pub cost: usize,
}

/// Checks a previewed whole word against every constraint that can judge a
/// word in isolation. `remaining` is the char budget left in the sentence.
pub fn admits_future_word(
    constraints: &[ConstraintSpec],
    w: &FutureWord<'_>,
    remaining: Option<usize>,
    policy: &CharSumPolicy,
) -> bool {
    if let Some(r) = remaining {
        if w.cost + policy.closing_cost > r {
            return false;
        }
    }
    let body = w.word.trim_start();
    constraints.iter().all(|c| match c {
        ConstraintSpec::WordCount { scope, max, .. } if scope.covers(w.sentence) => {
            max.is_none_or(|m| w.word_index < m)
        }
        ConstraintSpec::PrefixKeyword { sentence, keyword }
            if *sentence == w.sentence && w.word_index == 0 =>
        {
            body.trim_end_matches(|c: char| !c.is_alphanumeric()) == keyword
        }
        ConstraintSpec::ForbiddenWords { words } => {
            let core = word_core(body).to_lowercase();
            !words.iter().any(|f| f.to_lowercase() == core)
        }
        ConstraintSpec::LetterExclusion { letters } => !lexical::contains_excluded(body, letters),
        _ => true,
    })
}
