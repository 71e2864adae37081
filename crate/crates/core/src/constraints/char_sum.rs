use std::collections::BTreeSet;

use super::sum::{completion_tuples, FollowRange, SumWindow};
use super::{active_word_window, CharSumPolicy, PropagationBounds, PropagationResult};
use crate::domain::Domain;
use crate::state::CspState;
use crate::token::Token;

/// Filters `candidate` against a character-sum window on the current sentence.
///
/// A sentence-closing token survives iff it lands the sentence inside
/// `[target_min, target_max]`. Any other token survives iff at least a closing
/// mark still fits afterwards and the minimum stays reachable. With
/// `future_lengths` (previewed cost sets, the first one for the word a token
/// opens), a word-opening token must also head an admissible completion tuple.
pub fn propagate_char_sum(
    state: &CspState,
    candidate: &Domain,
    future_lengths: Option<&[BTreeSet<usize>]>,
    target_min: usize,
    target_max: usize,
    policy: &CharSumPolicy,
) -> PropagationResult {
    let used = state.sentence_char_used;
    let initial = state.at_sentence_start();
    let words_now = state.current_sentence_words();
    let word_window = active_word_window(state);
    let current_word_len = state.open_meta().map_or(0, |m| m.word.chars().count());

    let growth_cap = |opens: bool| -> Option<usize> {
        let (_, max_words) = word_window?;
        let max_words = max_words?;
        let words_after = words_now + usize::from(opens);
        let new_words = max_words.saturating_sub(words_after);
        // the current word may still grow up to max_word_len
        let word_slack = if opens {
            policy.max_word_len
        } else {
            policy.max_word_len.saturating_sub(current_word_len)
        };
        Some(word_slack + new_words * (1 + policy.max_word_len) + policy.closing_cost)
    };

    let closing_bound = target_max.saturating_sub(used);
    let bounds = PropagationBounds {
        lower: growth_cap(true)
            .map_or(0, |cap| target_min.saturating_sub(used + cap)),
        upper: closing_bound.saturating_sub(1),
    };

    let keep = |v: &Token| -> bool {
        let c = v.cost(initial, policy.count_spaces);
        let after = used + c;
        if after > target_max {
            return false;
        }
        if v.ends_sentence {
            return after >= target_min;
        }
        // at least one more token, of at least one character, must fit
        if after + 1 > target_max {
            return false;
        }
        let opens = v.starts_word || initial;
        if let Some(cap) = growth_cap(opens) {
            if after + cap < target_min {
                return false;
            }
        }
        match future_lengths {
            Some(sets) if opens && !sets.is_empty() => {
                lookahead_admits(c, sets, used, target_min, target_max, words_now, word_window, policy)
            }
            _ => true,
        }
    };

    let filtered = candidate.retain(keep);
    PropagationResult::new(filtered, Some(bounds))
}

/// Cost `c` of a word-opening token heads some admissible completion.
#[allow(clippy::too_many_arguments)]
fn lookahead_admits(
    c: usize,
    sets: &[BTreeSet<usize>],
    used: usize,
    target_min: usize,
    target_max: usize,
    words_now: usize,
    word_window: Option<(usize, Option<usize>)>,
    policy: &CharSumPolicy,
) -> bool {
    if !sets[0].contains(&c) {
        return false;
    }
    let tuples = completion_tuples(
        sets,
        words_window(used, target_min, target_max, policy),
        follow_range(words_now + 1, word_window),
        policy.tail_word_cost(),
    );
    tuples.iter().any(|t| t[0] == c)
}

/// Window on the summed word costs once the closing mark is set aside.
pub(crate) fn words_window(
    used: usize,
    target_min: usize,
    target_max: usize,
    policy: &CharSumPolicy,
) -> SumWindow {
    let reserve = used + policy.closing_cost;
    SumWindow {
        min: target_min.saturating_sub(reserve),
        max: target_max.saturating_sub(reserve),
    }
}

/// Further words allowed after the word that brings the count to `words_after`.
pub(crate) fn follow_range(
    words_after: usize,
    word_window: Option<(usize, Option<usize>)>,
) -> FollowRange {
    match word_window {
        None => FollowRange::ANY,
        Some((min, max)) => FollowRange {
            min: min.saturating_sub(words_after),
            max: max.map(|m| m.saturating_sub(words_after)),
        },
    }
}
