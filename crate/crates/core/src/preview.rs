//! Masked lookahead: previews the next `d` words of the current sentence and
//! turns their costs into a filter on the token about to be assigned.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::constraints::sum::{cartesian_sums, completion_tuples, SumWindow};
use crate::constraints::{
    active_char_sum, active_word_window, admits_future_word, follow_range, words_window,
    CharSumPolicy, FutureWord,
};
use crate::domain::Domain;
use crate::error::BackendError;
use crate::lm::{build_masked_prompt, MaskedModel};
use crate::state::CspState;
use crate::token::{word_cost, Token};

/// Previewed word domains and their cost sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreviewSnapshot {
    pub depth: usize,
    /// Candidates surviving every applicable constraint, per future word.
    pub domains: Vec<Domain>,
    /// `length_sets[i]` holds the costs of `domains[i]`.
    pub length_sets: Vec<BTreeSet<usize>>,
    /// First previewed position left without candidates.
    pub wiped_out_at: Option<usize>,
}

impl PreviewSnapshot {
    pub fn is_wipeout(&self) -> bool {
        self.wiped_out_at.is_some()
    }
}

/// Admissible cost tuples, or no restriction when no char-sum applies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Admissible {
    Universal,
    Tuples(BTreeSet<Vec<usize>>),
}

impl Admissible {
    pub fn admits_first(&self, cost: usize) -> bool {
        match self {
            Admissible::Universal => true,
            Admissible::Tuples(t) => t.iter().any(|t| t[0] == cost),
        }
    }
}

/// Default trigger: at most two words of maximal length remain.
pub fn default_trigger_budget(max_word_len: usize) -> usize {
    2 * (1 + max_word_len)
}

/// True when a char-sum governs the current sentence and at most
/// `trigger_budget` characters remain below its maximum.
pub fn should_preview(state: &CspState, trigger_budget: usize) -> bool {
    active_char_sum(state)
        .is_some_and(|(_, max)| max.saturating_sub(state.sentence_char_used) <= trigger_budget)
}

fn is_word(token: &Token) -> bool {
    token.body().chars().any(char::is_alphanumeric)
}

/// Queries the masked model once for the next `d` words and filters each
/// previewed domain with the constraints that can judge a word on its own.
pub fn preview_domains(
    state: &CspState,
    preprompt: &str,
    mlm: &dyn MaskedModel,
    d: usize,
    k: usize,
    policy: &CharSumPolicy,
) -> Result<PreviewSnapshot, BackendError> {
    let prompt = build_masked_prompt(state, preprompt, d)
        .map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
    let raw = mlm.fill_mask_domains(&prompt, k)?;
    if raw.len() != d {
        return Err(BackendError::Protocol {
            message: format!("expected {d} mask domains, got {}", raw.len()),
            raw: String::new(),
        });
    }

    let initial = state.at_sentence_start();
    let first_index = state.current_sentence_words();
    let remaining = active_char_sum(state).map(|(_, max)| max.saturating_sub(state.sentence_char_used));

    let mut domains = Vec::with_capacity(d);
    let mut length_sets = Vec::with_capacity(d);
    for (i, dom) in raw.into_iter().enumerate() {
        let sentence_initial = initial && i == 0;
        let cost = |t: &Token| word_cost(t.body(), sentence_initial, policy.count_spaces);
        let kept = dom.retain(|t| {
            is_word(t)
                && admits_future_word(
                    &state.constraints,
                    &FutureWord {
                        sentence: state.sentence_index,
                        word_index: first_index + i,
                        word: t.body(),
                        cost: cost(t),
                    },
                    remaining,
                    policy,
                )
        });
        length_sets.push(kept.iter().map(cost).collect::<BTreeSet<_>>());
        domains.push(kept);
    }
    let wiped_out_at = length_sets.iter().position(BTreeSet::is_empty);
    Ok(PreviewSnapshot {
        depth: d,
        domains,
        length_sets,
        wiped_out_at,
    })
}

/// Tuples of the Cartesian product of the snapshot's length sets whose sum
/// lies in `window`: the previewed words are exactly the remaining ones.
pub fn admissible_sums(snapshot: &PreviewSnapshot, window: SumWindow) -> BTreeSet<Vec<usize>> {
    cartesian_sums(&snapshot.length_sets, window)
}

/// Admissible completions of the current sentence, where the word about to be
/// opened is the first previewed one and the remaining word count is only
/// bounded by the active word-count window.
pub fn admissible_completions(
    state: &CspState,
    snapshot: &PreviewSnapshot,
    policy: &CharSumPolicy,
) -> Admissible {
    let Some((min, max)) = active_char_sum(state) else {
        return Admissible::Universal;
    };
    if snapshot.length_sets.is_empty() {
        return Admissible::Universal;
    }
    Admissible::Tuples(completion_tuples(
        &snapshot.length_sets,
        words_window(state.sentence_char_used, min, max, policy),
        follow_range(
            state.current_sentence_words() + 1,
            active_word_window(state),
        ),
        policy.tail_word_cost(),
    ))
}

/// Keeps a word-opening token iff its cost heads an admissible tuple. Other
/// tokens pass; survivors keep their order.
pub fn join_filter(
    state: &CspState,
    current: &Domain,
    sums: &Admissible,
    policy: &CharSumPolicy,
) -> Domain {
    if *sums == Admissible::Universal {
        return current.clone();
    }
    let initial = state.at_sentence_start();
    current.retain(|v| {
        let opens = v.starts_word || initial;
        !opens || sums.admits_first(v.cost(initial, policy.count_spaces))
    })
}
