//! Token values produced by the language-model backends.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Separator that opens a new word under the byte-pair-encoding convention.
pub const WORD_SEPARATOR: char = ' ';

/// Characters that close a sentence when they end a token.
pub const SENTENCE_TERMINATORS: [char; 3] = ['.', '!', '?'];

/// A candidate value for a decision variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub char_len: usize,
    /// Log-likelihood assigned by the producing model.
    pub score: f64,
    pub starts_word: bool,
    pub ends_sentence: bool,
}

impl Token {
    pub fn new(surface: impl Into<String>, score: f64) -> Result<Self, CoreError> {
        let surface = surface.into();
        if surface.is_empty() {
            return Err(CoreError::EmptyToken);
        }
        let char_len = surface.chars().count();
        let starts_word = surface.starts_with(WORD_SEPARATOR);
        let ends_sentence = surface
            .trim_end_matches(WORD_SEPARATOR)
            .chars()
            .last()
            .is_some_and(|c| SENTENCE_TERMINATORS.contains(&c));
        Ok(Self {
            surface,
            char_len,
            score,
            starts_word,
            ends_sentence,
        })
    }

    /// Surface with the leading word separator removed.
    pub fn body(&self) -> &str {
        self.surface
            .strip_prefix(WORD_SEPARATOR)
            .unwrap_or(&self.surface)
    }

    /// True when the token is a sub-word continuation (neither opens a word
    /// nor consists solely of punctuation).
    pub fn is_word_piece(&self) -> bool {
        !self.starts_word && self.body().chars().next().is_some_and(char::is_alphanumeric)
    }

    /// Characters this token adds to the rendered sentence.
    pub fn cost(&self, sentence_initial: bool, count_spaces: bool) -> usize {
        surface_cost(&self.surface, sentence_initial, count_spaces)
    }
}

/// Rendered contribution of `surface` to its sentence. A sentence-initial
/// surface loses its leading separator when rendered.
pub fn surface_cost(surface: &str, sentence_initial: bool, count_spaces: bool) -> usize {
    if !count_spaces {
        return surface.chars().filter(|c| !c.is_whitespace()).count();
    }
    let n = surface.chars().count();
    if sentence_initial && surface.starts_with(WORD_SEPARATOR) {
        n - 1
    } else {
        n
    }
}

/// Cost of a whole word (given without separator) placed at a word boundary.
pub fn word_cost(word: &str, sentence_initial: bool, count_spaces: bool) -> usize {
    let body = word.strip_prefix(WORD_SEPARATOR).unwrap_or(word);
    let letters = if count_spaces {
        body.chars().count()
    } else {
        body.chars().filter(|c| !c.is_whitespace()).count()
    };
    if count_spaces && !sentence_initial {
        letters + 1
    } else {
        letters
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_follow_surface() {
        let t = Token::new(" boy", -1.0).unwrap();
        assert!(t.starts_word);
        assert!(!t.ends_sentence);
        assert_eq!(t.char_len, 4);
        assert_eq!(t.body(), "boy");

        let t = Token::new("ing", 0.0).unwrap();
        assert!(!t.starts_word);
        assert!(t.is_word_piece());

        let t = Token::new(".", 0.0).unwrap();
        assert!(t.ends_sentence);
        assert!(!t.is_word_piece());

        let t = Token::new(" end?", 0.0).unwrap();
        assert!(t.ends_sentence);
    }

    #[test]
    fn empty_surface_rejected() {
        assert!(matches!(Token::new("", 0.0), Err(CoreError::EmptyToken)));
    }

    #[test]
    fn char_len_counts_scalars() {
        let t = Token::new(" épée", 0.0).unwrap();
        assert_eq!(t.char_len, 5);
    }

    #[test]
    fn costs() {
        assert_eq!(surface_cost(" The", true, true), 3);
        assert_eq!(surface_cost(" The", false, true), 4);
        assert_eq!(surface_cost(" The", false, false), 3);
        assert_eq!(word_cost("capital", false, true), 8);
        assert_eq!(word_cost(" capital", true, true), 7);
        assert_eq!(word_cost("capital", false, false), 7);
    }
}
