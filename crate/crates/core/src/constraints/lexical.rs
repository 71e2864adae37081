use std::collections::BTreeSet;

use super::{ConstraintSpec, PropagationResult};
use crate::domain::Domain;
use crate::state::CspState;
use crate::token::Token;

/// A word stripped of surrounding non-alphanumeric characters.
pub fn word_core(word: &str) -> &str {
    word.trim_matches(|c: char| !c.is_alphanumeric())
}

pub(crate) fn contains_excluded(text: &str, letters: &BTreeSet<char>) -> bool {
    text.chars()
        .flat_map(char::to_lowercase)
        .any(|c| letters.iter().any(|l| l.to_lowercase().any(|l| l == c)))
}

fn is_forbidden(word: &str, words: &BTreeSet<String>) -> bool {
    let core = word_core(word).to_lowercase();
    !core.is_empty() && words.iter().any(|w| w.to_lowercase() == core)
}

fn keyword_consistent(word: &str, keyword: &str) -> bool {
    keyword.starts_with(word)
        || word
            .strip_prefix(keyword)
            .is_some_and(|rest| rest.chars().all(|c| !c.is_alphanumeric()))
}

fn keyword_complete(word: &str, keyword: &str) -> bool {
    word.trim_end_matches(|c: char| !c.is_alphanumeric()) == keyword
}

/// Word text and completion status after appending `v` to the state.
struct WordEffect {
    /// Word the token belongs to, as it stands after the token.
    word: String,
    /// Word completed by the arrival of a word-opening token.
    completed_before: Option<String>,
    /// The token's own word is complete (the token closes the sentence).
    completes_own: bool,
    word_index: usize,
}

fn effect(state: &CspState, v: &Token) -> WordEffect {
    let initial = state.at_sentence_start();
    let open = state.open_meta();
    let opens = v.starts_word || initial;
    let words = state.current_sentence_words();
    if opens {
        WordEffect {
            word: v.body().to_string(),
            completed_before: open.map(|m| m.word.clone()),
            completes_own: v.ends_sentence,
            word_index: words,
        }
    } else {
        let prev = open.map_or(String::new(), |m| m.word.clone());
        WordEffect {
            word: prev + &v.surface,
            completed_before: None,
            completes_own: v.ends_sentence,
            word_index: words.saturating_sub(1),
        }
    }
}

/// Filters by a lexical constraint: prefix keyword, forbidden words, or
/// excluded letters. Other constraint kinds leave the domain unchanged.
pub fn propagate_lexical(
    state: &CspState,
    candidate: &Domain,
    spec: &ConstraintSpec,
) -> PropagationResult {
    let filtered = match spec {
        ConstraintSpec::PrefixKeyword { sentence, keyword } => {
            if state.sentence_index != *sentence {
                candidate.clone()
            } else {
                candidate.retain(|v| {
                    let e = effect(state, v);
                    if let Some(done) = &e.completed_before {
                        if e.word_index == 1 && !keyword_complete(done, keyword) {
                            return false;
                        }
                    }
                    if e.word_index != 0 {
                        return true;
                    }
                    keyword_consistent(&e.word, keyword)
                        && (!e.completes_own || keyword_complete(&e.word, keyword))
                })
            }
        }
        ConstraintSpec::ForbiddenWords { words } => candidate.retain(|v| {
            let e = effect(state, v);
            if e.completed_before.as_deref().is_some_and(|w| is_forbidden(w, words)) {
                return false;
            }
            !(e.completes_own && is_forbidden(&e.word, words))
        }),
        ConstraintSpec::LetterExclusion { letters } => {
            candidate.retain(|v| !contains_excluded(&v.surface, letters))
        }
        _ => candidate.clone(),
    };
    PropagationResult::new(filtered, None)
}
