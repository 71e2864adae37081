//! Subset-sum reasoning over previewed word-length sets.

use std::collections::BTreeSet;

/// Inclusive window on a sum of costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SumWindow {
    pub min: usize,
    pub max: usize,
}

impl SumWindow {
    pub fn exact(target: usize) -> Self {
        Self {
            min: target,
            max: target,
        }
    }

    pub fn contains(&self, v: usize) -> bool {
        self.min <= v && v <= self.max
    }
}

/// All tuples of `sets[0] × … × sets[n-1]` whose sum lies in `window`.
pub fn cartesian_sums(sets: &[BTreeSet<usize>], window: SumWindow) -> BTreeSet<Vec<usize>> {
    let mut out = BTreeSet::new();
    let mut prefix = Vec::with_capacity(sets.len());
    extend(sets, window, 0, &mut prefix, &mut out, &mut |_, _| true);
    out
}

fn extend(
    sets: &[BTreeSet<usize>],
    window: SumWindow,
    sum: usize,
    prefix: &mut Vec<usize>,
    out: &mut BTreeSet<Vec<usize>>,
    accept_partial: &mut dyn FnMut(usize, usize) -> bool,
) {
    let depth = prefix.len();
    if depth == sets.len() {
        if window.contains(sum) {
            out.insert(prefix.clone());
        }
        return;
    }
    for &c in &sets[depth] {
        let s = sum + c;
        // costs are non-negative, so an overshoot cannot recover
        if s > window.max {
            break;
        }
        if !accept_partial(depth, s) {
            continue;
        }
        prefix.push(c);
        extend(sets, window, s, prefix, out, accept_partial);
        prefix.pop();
    }
}

/// How many further words may follow the word being assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FollowRange {
    pub min: usize,
    pub max: Option<usize>,
}

impl FollowRange {
    pub const ANY: FollowRange = FollowRange { min: 0, max: None };
}

/// Admissible cost tuples for the remaining words of a sentence.
///
/// `sets[0]` holds candidate costs of the word being assigned and `sets[i]`
/// those of the i-th following word. Tuples of length `j + 1` describe
/// completions with exactly `j` further words (`j < sets.len()`); a tuple of
/// full length additionally stands for completions with more words than were
/// previewed, whose unpreviewed words each cost at least `tail_word_cost`.
pub fn completion_tuples(
    sets: &[BTreeSet<usize>],
    window: SumWindow,
    follow: FollowRange,
    tail_word_cost: usize,
) -> BTreeSet<Vec<usize>> {
    let mut out = BTreeSet::new();
    let d = sets.len();
    if d == 0 {
        return out;
    }
    let last_exact = follow.max.map_or(d - 1, |m| m.min(d - 1));
    for j in follow.min..=last_exact {
        out.extend(cartesian_sums(&sets[..=j], window));
    }
    let open_tail = follow.max.is_none_or(|m| m >= d);
    if open_tail {
        let tail_words = follow.min.saturating_sub(d - 1).max(1);
        let reserve = tail_words * tail_word_cost;
        if reserve <= window.max {
            let relaxed = SumWindow {
                min: 0,
                max: window.max - reserve,
            };
            out.extend(cartesian_sums(sets, relaxed));
        }
    }
    out
}
