//! Post-hoc checker for finished text. Re-parses sentences and words from the
//! raw string; nothing here looks at solver state.

use serde::{Deserialize, Serialize};

use super::{ConstraintSpec, SentenceScope};
use crate::task::TaskSpec;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: String,
    pub sentence: Option<usize>,
    pub expected: String,
    pub measured: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub satisfied: bool,
    pub violations: Vec<Violation>,
}

/// Splits text into sentences. A sentence ends at `.`, `!` or `?` followed by
/// whitespace or the end of the text; a trailing unterminated fragment counts
/// as a sentence too.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut it = text.char_indices().peekable();
    while let Some((i, c)) = it.next() {
        if matches!(c, '.' | '!' | '?') {
            let boundary = match it.peek() {
                None => true,
                Some((_, n)) => n.is_whitespace(),
            };
            if boundary {
                let end = i + c.len_utf8();
                let s = text[start..end].trim();
                if !s.is_empty() {
                    out.push(s);
                }
                start = end;
            }
        }
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest);
    }
    out
}

fn sentence_length(sentence: &str, count_spaces: bool) -> usize {
    if count_spaces {
        sentence.chars().count()
    } else {
        sentence.chars().filter(|c| !c.is_whitespace()).count()
    }
}

fn strip_edges(word: &str) -> &str {
    let is_mark = |c: char| !c.is_alphanumeric();
    word.trim_start_matches(is_mark).trim_end_matches(is_mark)
}

fn scoped(scope: SentenceScope, n_sentences: usize) -> Vec<usize> {
    match scope {
        SentenceScope::All => (0..n_sentences).collect(),
        SentenceScope::Sentence(s) => vec![s],
    }
}

/// Checks every constraint of `task` (plus its sentence count) against `text`.
pub fn validate_solution(text: &str, task: &TaskSpec, count_spaces: bool) -> ValidationReport {
    let sentences = split_sentences(text);
    let mut violations = Vec::new();
    let missing = |id: String, s: usize, expected: String| Violation {
        constraint: id,
        sentence: Some(s),
        expected,
        measured: "missing sentence".into(),
    };

    if sentences.len() != task.sentences {
        violations.push(Violation {
            constraint: "sentences".into(),
            sentence: None,
            expected: task.sentences.to_string(),
            measured: sentences.len().to_string(),
        });
    }

    for spec in &task.constraints {
        let id = spec.id();
        match spec {
            ConstraintSpec::CharSum {
                scope,
                target_min,
                target_max,
            } => {
                let expected = if target_min == target_max {
                    format!("={target_min}")
                } else {
                    format!("{target_min}-{target_max}")
                };
                for s in scoped(*scope, sentences.len()) {
                    match sentences.get(s) {
                        None => violations.push(missing(id.clone(), s, expected.clone())),
                        Some(text) => {
                            let n = sentence_length(text, count_spaces);
                            if n < *target_min || n > *target_max {
                                violations.push(Violation {
                                    constraint: id.clone(),
                                    sentence: Some(s),
                                    expected: expected.clone(),
                                    measured: n.to_string(),
                                });
                            }
                        }
                    }
                }
            }
            ConstraintSpec::WordCount { scope, min, max } => {
                let expected = match max {
                    Some(m) if m == min => format!("={min}"),
                    Some(m) => format!("{min}-{m}"),
                    None => format!(">={min}"),
                };
                for s in scoped(*scope, sentences.len()) {
                    match sentences.get(s) {
                        None => violations.push(missing(id.clone(), s, expected.clone())),
                        Some(text) => {
                            let n = text.split_whitespace().count();
                            if n < *min || max.is_some_and(|m| n > m) {
                                violations.push(Violation {
                                    constraint: id.clone(),
                                    sentence: Some(s),
                                    expected: expected.clone(),
                                    measured: n.to_string(),
                                });
                            }
                        }
                    }
                }
            }
            ConstraintSpec::SentenceCount { n } => {
                if sentences.len() != *n {
                    violations.push(Violation {
                        constraint: id,
                        sentence: None,
                        expected: n.to_string(),
                        measured: sentences.len().to_string(),
                    });
                }
            }
            ConstraintSpec::PrefixKeyword { sentence, keyword } => match sentences.get(*sentence) {
                None => violations.push(missing(id, *sentence, keyword.clone())),
                Some(text) => {
                    let first = text.split_whitespace().next().unwrap_or("");
                    let first = first.trim_end_matches(|c: char| !c.is_alphanumeric());
                    if first != keyword {
                        violations.push(Violation {
                            constraint: id,
                            sentence: Some(*sentence),
                            expected: keyword.clone(),
                            measured: first.to_string(),
                        });
                    }
                }
            },
            ConstraintSpec::ForbiddenWords { words } => {
                let banned: Vec<String> = words.iter().map(|w| w.to_lowercase()).collect();
                for (s, text) in sentences.iter().enumerate() {
                    for w in text.split_whitespace() {
                        let w = strip_edges(w).to_lowercase();
                        if banned.contains(&w) {
                            violations.push(Violation {
                                constraint: id.clone(),
                                sentence: Some(s),
                                expected: "absent".into(),
                                measured: w,
                            });
                        }
                    }
                }
            }
            ConstraintSpec::LetterExclusion { letters } => {
                let banned: Vec<char> = letters.iter().flat_map(|c| c.to_lowercase()).collect();
                for (s, text) in sentences.iter().enumerate() {
                    let hits = text
                        .chars()
                        .flat_map(char::to_lowercase)
                        .filter(|c| banned.contains(c))
                        .count();
                    if hits > 0 {
                        violations.push(Violation {
                            constraint: id.clone(),
                            sentence: Some(s),
                            expected: "0".into(),
                            measured: hits.to_string(),
                        });
                    }
                }
            }
        }
    }

    ValidationReport {
        satisfied: violations.is_empty(),
        violations,
    }
}
