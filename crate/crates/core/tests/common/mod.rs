#![allow(dead_code)]

//! Generate-and-test oracle and random instance builder shared by the
//! integration tests. Nothing here calls the solver's propagators or its
//! renderer.

use std::collections::BTreeSet;

use gencp::constraints::{ConstraintSpec, SentenceScope};
use gencp::lm::{LanguageModel, LeftPrompt, MockModel};
use gencp::{validate_solution, TaskSpec, Token};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reference renderer, written character by character.
pub fn oracle_render(tokens: &[Token]) -> String {
    let mut out = String::new();
    let mut sentence_start = true;
    for t in tokens {
        let mut chars = t.surface.chars().peekable();
        if sentence_start {
            if !out.is_empty() {
                out.push(' ');
            }
            if chars.peek() == Some(&' ') {
                chars.next();
            }
        }
        for c in chars {
            out.push(c);
        }
        sentence_start = t.ends_sentence;
    }
    while out.ends_with(' ') {
        out.pop();
    }
    out
}

fn current_sentence(text: &str) -> usize {
    // length of the text after the last closed sentence
    let mut start = 0;
    let chars: Vec<char> = text.chars().collect();
    for i in 0..chars.len() {
        if matches!(chars[i], '.' | '!' | '?') && (i + 1 == chars.len() || chars[i + 1] == ' ') {
            start = i + 1;
        }
    }
    chars[start..].iter().collect::<String>().trim_start().chars().count()
}

pub struct Brute<'a> {
    pub task: &'a TaskSpec,
    pub llm: &'a dyn LanguageModel,
    pub k: usize,
    pub max_sentence_tokens: usize,
    /// Any prefix whose open sentence renders longer than this is dead.
    /// Only meaningful when spaces are counted.
    pub sentence_char_cap: Option<usize>,
    pub count_spaces: bool,
}

impl Brute<'_> {
    /// Every token sequence over the top-k domain tree that closes all
    /// sentences within the token cap and passes the validator.
    pub fn solutions(&self) -> BTreeSet<Vec<String>> {
        let mut out = BTreeSet::new();
        let mut prefix = Vec::new();
        self.walk(&mut prefix, 0, 0, &mut out);
        out
    }

    fn walk(
        &self,
        prefix: &mut Vec<Token>,
        closed: usize,
        in_sentence: usize,
        out: &mut BTreeSet<Vec<String>>,
    ) {
        if in_sentence >= self.max_sentence_tokens {
            return;
        }
        let prompt = LeftPrompt {
            preprompt: self.task.preprompt.clone(),
            generated: oracle_render(prefix),
        };
        let domain = self.llm.next_token_domain(&prompt, self.k, 0.0).unwrap();
        for t in domain.candidates {
            let ends = t.ends_sentence;
            prefix.push(t);
            let text = oracle_render(prefix);
            let open_len = if ends { 0 } else { current_sentence(&text) };
            let too_long = self.sentence_char_cap.is_some_and(|cap| open_len > cap);
            if !too_long {
                if ends && closed + 1 == self.task.sentences {
                    if validate_solution(&text, self.task, self.count_spaces).satisfied {
                        out.insert(prefix.iter().map(|t| t.surface.clone()).collect());
                    }
                } else if ends {
                    self.walk(prefix, closed + 1, 0, out);
                } else {
                    self.walk(prefix, closed, in_sentence + 1, out);
                }
            }
            prefix.pop();
        }
    }
}

const POOL: [&str; 16] = [
    "a", "an", "ox", "the", "cat", "sun", "ran", "sat", "wolf", "moon", "fell", "over", "stone",
    "river", "dragon", "kingdom",
];

pub struct Instance {
    pub corpus: String,
    pub mock: MockModel,
    pub task: TaskSpec,
    pub top_k: usize,
    pub max_tokens: usize,
}

/// A random one-sentence exact char-sum instance that is feasible by
/// construction: the target is the length of a sentence read off the tree.
pub fn random_instance(seed: u64, max_tokens: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut words: Vec<&str> = POOL.to_vec();
        words.shuffle(&mut rng);
        words.truncate(rng.gen_range(4..=7));
        let sentences: Vec<String> = (0..6)
            .map(|_| {
                let n = rng.gen_range(1..=4);
                let body: Vec<&str> = (0..n).map(|_| *words.choose(&mut rng).unwrap()).collect();
                format!("{} .", body.join(" "))
            })
            .collect();
        let corpus = sentences.join(" ");
        let mock = gencp::lm::build_mock(&corpus, 2, seed).unwrap();
        let top_k = rng.gen_range(2..=5);

        // random walk down the tree for a target length
        for _ in 0..20 {
            let mut path: Vec<Token> = Vec::new();
            while path.len() < max_tokens {
                let prompt = LeftPrompt {
                    preprompt: String::new(),
                    generated: oracle_render(&path),
                };
                let d = mock.next_token_domain(&prompt, top_k, 0.0).unwrap();
                let t = d.candidates.choose(&mut rng).unwrap().clone();
                let ends = t.ends_sentence;
                path.push(t);
                if ends {
                    break;
                }
            }
            if path.last().is_some_and(|t| t.ends_sentence) {
                let target = oracle_render(&path).chars().count();
                let task = TaskSpec::new(
                    format!("random-{seed}"),
                    "",
                    1,
                    vec![ConstraintSpec::char_sum_exact(SentenceScope::All, target)],
                );
                return Instance {
                    corpus,
                    mock,
                    task,
                    top_k,
                    max_tokens,
                };
            }
        }
    }
}
