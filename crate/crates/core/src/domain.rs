use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::token::Token;

/// Which kind of model produced a domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainSource {
    Autoregressive,
    Masked,
    Mock,
}

/// Ordered candidate values for one variable: score descending, ties broken
/// lexicographically by surface, no duplicate surfaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub candidates: Vec<Token>,
    pub source: DomainSource,
    /// Set when the producer returned fewer candidates than requested.
    #[serde(default)]
    pub underfilled: bool,
}

pub(crate) fn candidate_order(a: &Token, b: &Token) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.surface.cmp(&b.surface))
}

impl Domain {
    /// Builds a domain from unordered candidates: deduplicates surfaces
    /// (keeping the best score), sorts, and truncates to `k`.
    pub fn from_candidates(candidates: Vec<Token>, source: DomainSource, k: usize) -> Self {
        let mut best: HashMap<String, Token> = HashMap::with_capacity(candidates.len());
        for t in candidates {
            match best.get(&t.surface) {
                Some(prev) if prev.score >= t.score => {}
                _ => {
                    best.insert(t.surface.clone(), t);
                }
            }
        }
        let mut candidates: Vec<Token> = best.into_values().collect();
        candidates.sort_by(candidate_order);
        let underfilled = candidates.len() < k;
        candidates.truncate(k);
        Self {
            candidates,
            source,
            underfilled,
        }
    }

    /// Wraps candidates that are already ordered (used after filtering).
    pub fn ordered(candidates: Vec<Token>, source: DomainSource) -> Self {
        Self {
            candidates,
            source,
            underfilled: false,
        }
    }

    pub fn empty(source: DomainSource) -> Self {
        Self::ordered(Vec::new(), source)
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn contains(&self, token: &Token) -> bool {
        self.candidates.iter().any(|c| c.surface == token.surface)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Token> {
        self.candidates.iter()
    }

    /// Keeps candidates satisfying `keep`, preserving order.
    pub fn retain(&self, mut keep: impl FnMut(&Token) -> bool) -> Domain {
        Domain {
            candidates: self.candidates.iter().filter(|t| keep(t)).cloned().collect(),
            source: self.source,
            underfilled: self.underfilled,
        }
    }

    /// True when scores are non-increasing with lexicographic tie order.
    pub fn is_well_ordered(&self) -> bool {
        self.candidates
            .windows(2)
            .all(|w| candidate_order(&w[0], &w[1]) == Ordering::Less)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(s: &str, score: f64) -> Token {
        Token::new(s, score).unwrap()
    }

    #[test]
    fn sorts_dedups_truncates() {
        let d = Domain::from_candidates(
            vec![
                tok(" girl", -1.0),
                tok(" boy", -1.0),
                tok(" dog", -3.0),
                tok(" boy", -2.0),
                tok(" cat", -0.5),
            ],
            DomainSource::Mock,
            3,
        );
        let s: Vec<_> = d.iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(s, vec![" cat", " boy", " girl"]);
        assert_eq!(d.candidates[1].score, -1.0);
        assert!(!d.underfilled);
        assert!(d.is_well_ordered());
    }

    #[test]
    fn underfilled_flag() {
        let d = Domain::from_candidates(vec![tok("a", 0.0)], DomainSource::Mock, 5);
        assert!(d.underfilled);
        assert_eq!(d.len(), 1);
    }
}
