//! Depth-first search over the dynamic CSP.
//!
//! Each node creates one variable, asks the left-to-right model for its
//! domain, filters it, and tries values in likelihood order. An emptied
//! domain retracts the parent's assignment. A solution either restarts the
//! search (with the solution banned) or lets the depth-first walk continue.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::constraints::{propagate_all, validate_solution, CharSumPolicy};
use crate::domain::{Domain, DomainSource};
use crate::error::SearchError;
use crate::lm::{build_left_prompt, LanguageModel, MaskedModel};
use crate::preview::{
    admissible_completions, default_trigger_budget, join_filter, preview_domains, should_preview,
    PreviewSnapshot,
};
use crate::state::{init_state, render_text, CspState};
use crate::task::TaskSpec;
use crate::token::Token;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "vanilla")]
    Vanilla,
    #[serde(rename = "metavar")]
    Metavar,
    #[serde(rename = "previewMLM")]
    PreviewMlm,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Vanilla, Variant::Metavar, Variant::PreviewMlm];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Vanilla => "vanilla",
            Variant::Metavar => "metavar",
            Variant::PreviewMlm => "previewMLM",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown variant `{s}` (expected vanilla, metavar or previewMLM)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub top_k: usize,
    /// Candidates per mask; `None` uses `top_k`.
    pub mlm_top_k: Option<usize>,
    /// Forwarded to the left-to-right backend. Value order stays by score.
    pub temperature: f64,
    /// Preview depth `d`; 0 disables preview.
    pub preview_depth: usize,
    /// Remaining-character threshold below which preview runs; `None` uses
    /// two maximal words.
    pub preview_trigger_budget: Option<usize>,
    pub max_llm_calls: Option<u64>,
    pub max_solutions: Option<usize>,
    pub max_wall_ms: Option<u64>,
    pub seed: u64,
    pub restart_on_solution: bool,
    /// Minimum mean log-likelihood per token of any expanded prefix.
    pub likelihood_floor: Option<f64>,
    pub variant: Variant,
    pub count_spaces: bool,
    pub max_word_len: usize,
    /// Tokens allowed in one sentence before the branch is abandoned.
    pub max_sentence_tokens: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            top_k: 50,
            mlm_top_k: None,
            temperature: 0.8,
            preview_depth: 2,
            preview_trigger_budget: None,
            max_llm_calls: None,
            max_solutions: None,
            max_wall_ms: None,
            seed: 0,
            restart_on_solution: true,
            likelihood_floor: None,
            variant: Variant::PreviewMlm,
            count_spaces: true,
            max_word_len: 20,
            max_sentence_tokens: 64,
        }
    }
}

impl SearchConfig {
    pub fn policy(&self) -> CharSumPolicy {
        CharSumPolicy {
            max_word_len: self.max_word_len,
            count_spaces: self.count_spaces,
            ..CharSumPolicy::default()
        }
    }

    pub fn trigger_budget(&self) -> usize {
        self.preview_trigger_budget
            .unwrap_or_else(|| default_trigger_budget(self.max_word_len))
    }

    pub fn check(&self) -> Result<(), SearchError> {
        if self.top_k == 0 || self.mlm_top_k == Some(0) {
            return Err(SearchError::Config("top-k must be at least 1".into()));
        }
        if self.max_sentence_tokens == 0 {
            return Err(SearchError::Config("max_sentence_tokens must be at least 1".into()));
        }
        Ok(())
    }

    fn previews(&self) -> bool {
        self.variant == Variant::PreviewMlm && self.preview_depth > 0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub llm_calls: u64,
    pub mlm_calls: u64,
    /// Retractions caused by an emptied domain or a rejected leaf.
    pub backtracks: u64,
    pub solutions: u64,
    pub nodes_expanded: u64,
    pub restarts: u64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub task_name: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub log_likelihood: f64,
    pub metrics_at_emit: Metrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The whole search tree was explored.
    Exhausted,
    SolutionLimit,
    LlmCallLimit,
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub solutions: Vec<Solution>,
    pub metrics: Metrics,
    pub stop: StopReason,
}

/// A fatal error together with what had been found before it.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchFailure {
    pub error: SearchError,
    pub solutions: Vec<Solution>,
    pub metrics: Metrics,
}

impl fmt::Display for SearchFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} LLM calls)", self.error, self.metrics.llm_calls)
    }
}

impl std::error::Error for SearchFailure {}

/// Millisecond time source for budgets and reports.
pub trait Clock {
    fn elapsed_ms(&self) -> u64;
}

/// Wall-clock time since construction.
#[derive(Debug, Clone, Copy)]
pub struct SystemClock(Instant);

impl SystemClock {
    pub fn start() -> Self {
        Self(Instant::now())
    }
}

impl Clock for SystemClock {
    fn elapsed_ms(&self) -> u64 {
        self.0.elapsed().as_millis() as u64
    }
}

/// Always reports zero; makes reports byte-reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct FrozenClock;

impl Clock for FrozenClock {
    fn elapsed_ms(&self) -> u64 {
        0
    }
}

/// Hooks into the search loop. Every method has an empty default.
pub trait Observer {
    /// A node was created; `domain` is its filtered domain.
    fn on_expand(&mut self, _state: &CspState, _domain: &Domain) {}
    /// The left-to-right backend returned `raw` for the newest variable.
    fn on_llm_domain(&mut self, _state: &CspState, _raw: &Domain) {}
    fn on_preview(&mut self, _state: &CspState, _snapshot: &PreviewSnapshot) {}
    /// Called right after a counted retraction.
    fn on_backtrack(&mut self, _state: &CspState) {}
    fn on_solution(&mut self, _solution: &Solution) {}
}

impl Observer for () {}

/// What to do after a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AfterSolution {
    Continue,
    Restart,
    Stop,
}

pub fn on_solution(cfg: &SearchConfig, solutions_so_far: usize) -> AfterSolution {
    if cfg.max_solutions.is_some_and(|m| solutions_so_far >= m) {
        AfterSolution::Stop
    } else if cfg.restart_on_solution {
        AfterSolution::Restart
    } else {
        AfterSolution::Continue
    }
}

/// Highest-ranked candidate whose surface has not been tried.
pub fn select_value<'a>(domain: &'a Domain, tried: &HashSet<String>) -> Option<&'a Token> {
    domain.iter().find(|t| !tried.contains(&t.surface))
}

struct Frame {
    domain: Domain,
    next: usize,
}

/// Tokens the solver never places: whitespace inside a token, and for the
/// vanilla variant, continuations that would glue sub-words together.
fn structurally_valid(t: &Token, variant: Variant) -> bool {
    if t.body().is_empty() || t.body().chars().any(char::is_whitespace) {
        return false;
    }
    variant != Variant::Vanilla || !t.is_word_piece()
}

#[allow(clippy::result_large_err)]
pub fn solve(
    task: &TaskSpec,
    cfg: &SearchConfig,
    llm: &dyn LanguageModel,
    mlm: Option<&dyn MaskedModel>,
) -> Result<SearchOutcome, SearchFailure> {
    solve_with(task, cfg, llm, mlm, &SystemClock::start(), &mut ())
}

#[allow(clippy::result_large_err)]
pub fn solve_with(
    task: &TaskSpec,
    cfg: &SearchConfig,
    llm: &dyn LanguageModel,
    mlm: Option<&dyn MaskedModel>,
    clock: &dyn Clock,
    observer: &mut dyn Observer,
) -> Result<SearchOutcome, SearchFailure> {
    let mut search = Search {
        task,
        cfg,
        llm,
        mlm,
        clock,
        metrics: Metrics::default(),
        solutions: Vec::new(),
    };
    match search.run(observer) {
        Ok(stop) => {
            search.metrics.wall_ms = clock.elapsed_ms();
            Ok(SearchOutcome {
                solutions: search.solutions,
                metrics: search.metrics,
                stop,
            })
        }
        Err(error) => {
            search.metrics.wall_ms = clock.elapsed_ms();
            Err(SearchFailure {
                error,
                solutions: search.solutions,
                metrics: search.metrics,
            })
        }
    }
}

struct Search<'a> {
    task: &'a TaskSpec,
    cfg: &'a SearchConfig,
    llm: &'a dyn LanguageModel,
    mlm: Option<&'a dyn MaskedModel>,
    clock: &'a dyn Clock,
    metrics: Metrics,
    solutions: Vec<Solution>,
}

impl Search<'_> {
    fn max_llm_calls(&self) -> Option<u64> {
        let task = self.task.budget.and_then(|b| b.max_llm_calls);
        min_opt(self.cfg.max_llm_calls, task)
    }

    fn max_solutions(&self) -> Option<usize> {
        let task = self.task.budget.and_then(|b| b.max_solutions);
        min_opt(self.cfg.max_solutions, task)
    }

    fn max_wall_ms(&self) -> Option<u64> {
        let task = self.task.budget.and_then(|b| b.max_wall_ms);
        min_opt(self.cfg.max_wall_ms, task)
    }

    fn budget_stop(&self) -> Option<StopReason> {
        if self.max_llm_calls().is_some_and(|m| self.metrics.llm_calls >= m) {
            return Some(StopReason::LlmCallLimit);
        }
        if self
            .max_wall_ms()
            .is_some_and(|m| self.clock.elapsed_ms() >= m)
        {
            return Some(StopReason::TimeLimit);
        }
        None
    }

    fn run(&mut self, observer: &mut dyn Observer) -> Result<StopReason, SearchError> {
        self.cfg.check()?;
        if self.cfg.previews() && self.mlm.is_none() {
            return Err(SearchError::Config(
                "the previewMLM variant needs a masked model".into(),
            ));
        }
        let cfg = SearchConfig {
            max_solutions: self.max_solutions(),
            ..self.cfg.clone()
        };
        if cfg.max_solutions == Some(0) {
            return Ok(StopReason::SolutionLimit);
        }
        let policy = cfg.policy();
        let mut nogoods: HashSet<Vec<String>> = HashSet::new();
        let mut state = init_state(self.task, cfg.count_spaces)?;
        let mut stack: Vec<Frame> = Vec::new();
        let mut expand = true;

        loop {
            if expand {
                if let Some(stop) = self.budget_stop() {
                    return Ok(stop);
                }
                let var = state.extend_variable()?;
                self.metrics.nodes_expanded += 1;
                let domain = self.node_domain(&state, &cfg, &policy, observer)?;
                state.set_domain(var, domain.clone())?;
                observer.on_expand(&state, &domain);
                stack.push(Frame { domain, next: 0 });
                expand = false;
            }

            let frame = stack.last_mut().expect("a node is always open here");
            let Some(token) = frame.domain.candidates.get(frame.next).cloned() else {
                stack.pop();
                state.discard_unassigned()?;
                if stack.is_empty() {
                    return Ok(StopReason::Exhausted);
                }
                state.retract_last()?;
                self.metrics.backtracks += 1;
                observer.on_backtrack(&state);
                continue;
            };
            frame.next += 1;
            let var = state.variables.len() - 1;
            state.assign_token(var, token)?;

            if state.sentence_index < self.task.sentences {
                expand = true;
                continue;
            }

            // every sentence is closed: a complete assignment
            let tokens: Vec<String> = state.surfaces().map(str::to_string).collect();
            let text = render_text(&state);
            let accepted = !nogoods.contains(&tokens)
                && validate_solution(&text, self.task, cfg.count_spaces).satisfied;
            if !accepted {
                state.retract_last()?;
                self.metrics.backtracks += 1;
                observer.on_backtrack(&state);
                continue;
            }

            self.metrics.solutions += 1;
            self.metrics.wall_ms = self.clock.elapsed_ms();
            let solution = Solution {
                task_name: self.task.name.clone(),
                text,
                log_likelihood: state.log_likelihood(),
                tokens: tokens.clone(),
                metrics_at_emit: self.metrics,
            };
            observer.on_solution(&solution);
            self.solutions.push(solution);
            nogoods.insert(tokens);

            match on_solution(&cfg, self.solutions.len()) {
                AfterSolution::Stop => return Ok(StopReason::SolutionLimit),
                AfterSolution::Restart => {
                    self.metrics.restarts += 1;
                    state = init_state(self.task, cfg.count_spaces)?;
                    stack.clear();
                    expand = true;
                }
                AfterSolution::Continue => {
                    state.retract_last()?;
                }
            }
        }
    }

    /// Preview, query, and filter the domain of the newest variable.
    fn node_domain(
        &mut self,
        state: &CspState,
        cfg: &SearchConfig,
        policy: &CharSumPolicy,
        observer: &mut dyn Observer,
    ) -> Result<Domain, SearchError> {
        if state.sentence_token_count >= cfg.max_sentence_tokens {
            return Ok(Domain::empty(DomainSource::Autoregressive));
        }

        let snapshot = match self.mlm {
            Some(mlm) if cfg.previews() && should_preview(state, cfg.trigger_budget()) => {
                self.metrics.mlm_calls += 1;
                let snap = preview_domains(
                    state,
                    &self.task.preprompt,
                    mlm,
                    cfg.preview_depth,
                    cfg.mlm_top_k.unwrap_or(cfg.top_k),
                    policy,
                )?;
                observer.on_preview(state, &snap);
                Some(snap)
            }
            _ => None,
        };

        let prompt = build_left_prompt(state, &self.task.preprompt);
        self.metrics.llm_calls += 1;
        let raw = self
            .llm
            .next_token_domain(&prompt, cfg.top_k, cfg.temperature)?;
        observer.on_llm_domain(state, &raw);

        let mut domain = raw.retain(|t| structurally_valid(t, cfg.variant));
        if let Some(floor) = cfg.likelihood_floor {
            let sum = state.log_likelihood();
            let n = state.trail.len() as f64 + 1.0;
            domain = domain.retain(|t| (sum + t.score) / n >= floor);
        }
        domain = propagate_all(state, &domain, None, policy).filtered;
        if let Some(snap) = &snapshot {
            let sums = admissible_completions(state, snap, policy);
            domain = join_filter(state, &domain, &sums, policy);
        }
        Ok(domain)
    }
}

fn min_opt<T: Ord>(a: Option<T>, b: Option<T>) -> Option<T> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}
