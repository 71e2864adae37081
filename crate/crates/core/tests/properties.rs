use std::collections::{BTreeSet, HashSet};

use gencp::constraints::sum::{cartesian_sums, SumWindow};
use gencp::constraints::{propagate_all, CharSumPolicy, ConstraintSpec, SentenceScope};
use gencp::search::select_value;
use gencp::state::{parse_assignment, render_tokens, serialize_surfaces};
use gencp::{CspState, Domain, DomainSource, Token};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SURFACES: [&str; 16] = [
    " the", " dragon", " ran", " a", "ing", "er", "s", ".", " sky.", "!", " Kingdoms", " of",
    "x", " moon?", ",", " é",
];

fn surfaces() -> impl Strategy<Value = Vec<&'static str>> {
    prop::collection::vec(prop::sample::select(SURFACES.to_vec()), 0..24)
}

fn build(seq: &[&str], count_spaces: bool) -> CspState {
    CspState::from_surfaces(seq.iter().copied(), count_spaces).unwrap()
}

fn tok(s: &str, score: f64) -> Token {
    Token::new(s, score).unwrap()
}

proptest! {
    #[test]
    fn retraction_restores_every_prefix(seq in surfaces(), cut in 0usize..24) {
        let cut = cut.min(seq.len());
        let mut s = build(&seq, true);
        for _ in cut..seq.len() {
            s.retract_last().unwrap();
            s.discard_unassigned().unwrap();
        }
        prop_assert_eq!(s, build(&seq[..cut], true));
    }

    #[test]
    fn char_used_matches_rendered_open_sentence(seq in surfaces(), count_spaces: bool) {
        let s = build(&seq, count_spaces);
        let start = seq
            .iter()
            .rposition(|x| tok(x, 0.0).ends_sentence)
            .map_or(0, |i| i + 1);
        let open = render_tokens(seq[start..].iter().map(|x| (*x, false)));
        let expect = if count_spaces {
            open.chars().count()
        } else {
            open.chars().filter(|c| !c.is_whitespace()).count()
        };
        prop_assert_eq!(s.sentence_char_used, expect);
    }

    #[test]
    fn words_partition_variables(seq in surfaces()) {
        let s = build(&seq, true);
        let ids: Vec<usize> = s.metas.iter().flat_map(|m| m.member_ids.clone()).collect();
        prop_assert_eq!(ids, (0..seq.len()).collect::<Vec<_>>());
        for m in &s.metas {
            let first = tok(seq[m.member_ids[0]], 0.0);
            let mut word = first.body().to_string();
            for &i in &m.member_ids[1..] {
                word.push_str(seq[i]);
            }
            prop_assert_eq!(&m.word, &word);
            // only the first member may open a word, unless it begins a sentence
            for &i in &m.member_ids[1..] {
                prop_assert!(!tok(seq[i], 0.0).starts_word);
            }
        }
    }

    #[test]
    fn serialization_round_trips(seq in prop::collection::vec("[a-z;\\\\ .]{1,6}", 0..10)) {
        let encoded = serialize_surfaces(seq.iter().map(String::as_str));
        prop_assert_eq!(parse_assignment(&encoded).unwrap(), seq);
    }

    #[test]
    fn propagation_shrinks_keeps_order_and_is_idempotent(
        prefix in surfaces(),
        cands in prop::collection::vec(prop::sample::select(SURFACES.to_vec()), 1..16),
        target in 5usize..40,
        words in 1usize..6,
    ) {
        let mut s = build(&prefix, true);
        s.constraints = vec![
            ConstraintSpec::char_sum_exact(SentenceScope::All, target),
            ConstraintSpec::WordCount { scope: SentenceScope::All, min: words, max: Some(words + 2) },
            ConstraintSpec::letter_exclusion(['z']),
        ];
        let d = Domain::from_candidates(
            cands.iter().enumerate().map(|(i, x)| tok(x, -(i as f64))).collect(),
            DomainSource::Mock,
            16,
        );
        let policy = CharSumPolicy::default();
        let once = propagate_all(&s, &d, None, &policy).filtered;
        let kept: Vec<&str> = once.iter().map(|t| t.surface.as_str()).collect();
        let order: Vec<&str> = d
            .iter()
            .map(|t| t.surface.as_str())
            .filter(|x| kept.contains(x))
            .collect();
        prop_assert_eq!(&kept, &order);
        prop_assert_eq!(propagate_all(&s, &once, None, &policy).filtered, once.clone());

        s.constraints.reverse();
        prop_assert_eq!(propagate_all(&s, &d, None, &policy).filtered, once);
    }

    #[test]
    fn domains_are_ordered_and_distinct(
        raw in prop::collection::vec((prop::sample::select(SURFACES.to_vec()), -5i32..0), 0..30),
        k in 1usize..12,
    ) {
        let d = Domain::from_candidates(
            raw.iter().map(|(s, sc)| tok(s, f64::from(*sc))).collect(),
            DomainSource::Autoregressive,
            k,
        );
        prop_assert!(d.len() <= k);
        prop_assert!(d.is_well_ordered());
        let distinct: HashSet<&str> = d.iter().map(|t| t.surface.as_str()).collect();
        prop_assert_eq!(distinct.len(), d.len());
        prop_assert_eq!(d.underfilled, distinct.len() < k && raw.iter().map(|r| r.0).collect::<HashSet<_>>().len() < k);
    }

    #[test]
    fn cartesian_sums_match_double_loop(
        a in prop::collection::btree_set(1usize..12, 0..6),
        b in prop::collection::btree_set(1usize..12, 0..6),
        lo in 0usize..20,
        width in 0usize..6,
    ) {
        let window = SumWindow { min: lo, max: lo + width };
        let mut expect = BTreeSet::new();
        for &x in &a {
            for &y in &b {
                if lo <= x + y && x + y <= lo + width {
                    expect.insert(vec![x, y]);
                }
            }
        }
        prop_assert_eq!(cartesian_sums(&[a, b], window), expect);
    }
}

#[test]
fn select_value_takes_first_untried() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10_000 {
        let n = rng.gen_range(0..10);
        let d = Domain::ordered(
            (0..n).map(|i| tok(&format!(" w{i}"), -(i as f64))).collect(),
            DomainSource::Mock,
        );
        let tried: HashSet<String> = (0..n)
            .filter(|_| rng.gen_bool(0.5))
            .map(|i| format!(" w{i}"))
            .collect();
        let expect = (0..n).map(|i| format!(" w{i}")).find(|s| !tried.contains(s));
        assert_eq!(select_value(&d, &tried).map(|t| t.surface.clone()), expect);
    }
}
