use super::PropagationResult;
use crate::domain::Domain;
use crate::state::CspState;

/// Enforces a per-sentence word window on the current sentence: no sentence
/// end below `min` words, no new word beyond `max`.
pub fn propagate_word_count(
    state: &CspState,
    candidate: &Domain,
    min: usize,
    max: Option<usize>,
) -> PropagationResult {
    let initial = state.at_sentence_start();
    let words = state.current_sentence_words();
    let filtered = candidate.retain(|v| {
        let opens = v.starts_word || initial;
        let words_after = words + usize::from(opens);
        if opens && max.is_some_and(|m| words_after > m) {
            return false;
        }
        !(v.ends_sentence && words_after < min)
    });
    PropagationResult::new(filtered, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSource;
    use crate::token::Token;

    fn dom(surfaces: &[&str]) -> Domain {
        Domain::ordered(
            surfaces.iter().map(|s| Token::new(*s, 0.0).unwrap()).collect(),
            DomainSource::Mock,
        )
    }

    fn names(d: &Domain) -> Vec<&str> {
        d.iter().map(|t| t.surface.as_str()).collect()
    }

    #[test]
    fn below_min_prunes_sentence_ends() {
        let s = CspState::from_surfaces([" a", " b", " c", " d", " e"], true).unwrap();
        assert_eq!(s.current_sentence_words(), 5);
        let d = dom(&[".", " f", "!", " g?", "s"]);
        let r = propagate_word_count(&s, &d, 14, None);
        assert_eq!(names(&r.filtered), vec![" f", "s"]);
    }

    #[test]
    fn vacuous_window_is_identity() {
        let s = CspState::from_surfaces([" a"], true).unwrap();
        let d = dom(&[".", " f", "s"]);
        let r = propagate_word_count(&s, &d, 0, None);
        assert_eq!(r.filtered, d);
    }

    #[test]
    fn at_max_only_continuations_and_ends() {
        let s = CspState::from_surfaces([" a", " b", " c"], true).unwrap();
        let d = dom(&[".", " f", "s", " g."]);
        let r = propagate_word_count(&s, &d, 3, Some(3));
        assert_eq!(names(&r.filtered), vec![".", "s"]);
    }

    #[test]
    fn sentence_initial_token_opens_a_word() {
        let s = CspState::new(vec![], true);
        let d = dom(&["Us", "."]);
        let r = propagate_word_count(&s, &d, 2, Some(2));
        assert_eq!(names(&r.filtered), vec!["Us"]);
    }
}
