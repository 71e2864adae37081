//! The dynamic CSP: variables created on the fly, word-level meta-variables,
//! a chronological trail, and surface realization of partial assignments.

use crate::constraints::ConstraintSpec;
use crate::domain::Domain;
use crate::error::CoreError;
use crate::task::TaskSpec;
use crate::token::{Token, WORD_SEPARATOR};

pub type VarId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVariable {
    pub id: VarId,
    /// Owning meta-variable, known once the variable is assigned.
    pub meta_id: Option<usize>,
    pub assignment: Option<Token>,
    pub domain: Option<Domain>,
}

/// A word: one or more contiguous decision variables.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaVariable {
    pub id: usize,
    pub member_ids: Vec<VarId>,
    pub complete: bool,
    pub word: String,
    pub sentence: usize,
}

/// Everything needed to undo one assignment exactly.
#[derive(Debug, Clone, PartialEq)]
struct Undo {
    sentence_index: usize,
    sentence_char_used: usize,
    sentence_word_count: usize,
    sentence_token_count: usize,
    opened_meta: bool,
    completed_meta: Option<usize>,
    prev_word_len: usize,
    completed_current: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CspState {
    pub variables: Vec<DecisionVariable>,
    pub metas: Vec<MetaVariable>,
    pub trail: Vec<(VarId, Token)>,
    pub sentence_index: usize,
    pub sentence_char_used: usize,
    /// Completed meta-variables in the current sentence.
    pub sentence_word_count: usize,
    pub sentence_token_count: usize,
    pub constraints: Vec<ConstraintSpec>,
    pub count_spaces: bool,
    undo: Vec<Undo>,
}

/// Starts an empty search state for `task`.
pub fn init_state(task: &TaskSpec, count_spaces: bool) -> Result<CspState, CoreError> {
    if task.constraints.is_empty() && task.budget.is_none() {
        return Err(CoreError::UnboundedTask);
    }
    Ok(CspState::new(task.constraints.clone(), count_spaces))
}

impl CspState {
    pub fn new(constraints: Vec<ConstraintSpec>, count_spaces: bool) -> Self {
        Self {
            variables: Vec::new(),
            metas: Vec::new(),
            trail: Vec::new(),
            sentence_index: 0,
            sentence_char_used: 0,
            sentence_word_count: 0,
            sentence_token_count: 0,
            constraints,
            count_spaces,
            undo: Vec::new(),
        }
    }

    /// Builds a state by assigning `surfaces` in order, each with a singleton domain.
    pub fn from_surfaces<'a>(
        surfaces: impl IntoIterator<Item = &'a str>,
        count_spaces: bool,
    ) -> Result<Self, CoreError> {
        let mut state = Self::new(Vec::new(), count_spaces);
        for s in surfaces {
            state.push_token(Token::new(s, 0.0)?)?;
        }
        Ok(state)
    }

    /// Creates, constrains to a singleton domain, and assigns one variable.
    pub fn push_token(&mut self, token: Token) -> Result<VarId, CoreError> {
        let var = self.extend_variable()?;
        self.set_domain(
            var,
            Domain::ordered(vec![token.clone()], crate::domain::DomainSource::Mock),
        )?;
        self.assign_token(var, token)?;
        Ok(var)
    }

    /// Appends one unassigned variable.
    pub fn extend_variable(&mut self) -> Result<VarId, CoreError> {
        if self.variables.last().is_some_and(|v| v.assignment.is_none()) {
            return Err(CoreError::PreviousUnassigned);
        }
        let id = self.variables.len();
        self.variables.push(DecisionVariable {
            id,
            meta_id: None,
            assignment: None,
            domain: None,
        });
        Ok(id)
    }

    /// Removes the newest variable when it is unassigned.
    pub fn discard_unassigned(&mut self) -> Result<(), CoreError> {
        match self.variables.last() {
            Some(v) if v.assignment.is_none() => {
                self.variables.pop();
                Ok(())
            }
            Some(v) => Err(CoreError::NotNewest(v.id)),
            None => Err(CoreError::NothingToRetract),
        }
    }

    pub fn set_domain(&mut self, var: VarId, domain: Domain) -> Result<(), CoreError> {
        let v = self.newest_unassigned(var)?;
        v.domain = Some(domain);
        Ok(())
    }

    fn newest_unassigned(&mut self, var: VarId) -> Result<&mut DecisionVariable, CoreError> {
        if var + 1 != self.variables.len() {
            return Err(CoreError::NotNewest(var));
        }
        let v = &mut self.variables[var];
        if v.assignment.is_some() {
            return Err(CoreError::NotNewest(var));
        }
        Ok(v)
    }

    /// True when the next token would begin a sentence.
    pub fn at_sentence_start(&self) -> bool {
        self.sentence_token_count == 0
    }

    pub fn assign_token(&mut self, var: VarId, token: Token) -> Result<(), CoreError> {
        let v = self.newest_unassigned(var)?;
        match &v.domain {
            None => return Err(CoreError::NoDomain(var)),
            Some(d) if !d.contains(&token) => {
                return Err(CoreError::NotInDomain {
                    var,
                    surface: token.surface,
                })
            }
            Some(_) => {}
        }

        let sentence_initial = self.at_sentence_start();
        let opens = token.starts_word || sentence_initial;
        let mut undo = Undo {
            sentence_index: self.sentence_index,
            sentence_char_used: self.sentence_char_used,
            sentence_word_count: self.sentence_word_count,
            sentence_token_count: self.sentence_token_count,
            opened_meta: opens,
            completed_meta: None,
            prev_word_len: 0,
            completed_current: false,
        };

        let meta_id = if opens {
            if let Some(prev) = self.metas.last_mut() {
                if !prev.complete {
                    prev.complete = true;
                    undo.completed_meta = Some(prev.id);
                    self.sentence_word_count += 1;
                }
            }
            let id = self.metas.len();
            self.metas.push(MetaVariable {
                id,
                member_ids: vec![var],
                complete: false,
                word: token.body().to_string(),
                sentence: self.sentence_index,
            });
            id
        } else {
            let meta = self
                .metas
                .last_mut()
                .expect("a continuation token always follows an open meta-variable");
            undo.prev_word_len = meta.word.len();
            meta.member_ids.push(var);
            meta.word.push_str(&token.surface);
            meta.id
        };

        self.sentence_char_used += token.cost(sentence_initial, self.count_spaces);
        self.sentence_token_count += 1;

        if token.ends_sentence {
            let meta = &mut self.metas[meta_id];
            if !meta.complete {
                meta.complete = true;
                undo.completed_current = true;
            }
            self.sentence_index += 1;
            self.sentence_char_used = 0;
            self.sentence_word_count = 0;
            self.sentence_token_count = 0;
        }

        let v = &mut self.variables[var];
        v.meta_id = Some(meta_id);
        v.assignment = Some(token.clone());
        self.trail.push((var, token));
        self.undo.push(undo);
        Ok(())
    }

    /// Undoes the newest assignment, leaving its variable unassigned.
    pub fn retract_last(&mut self) -> Result<(VarId, Token), CoreError> {
        let (var, token) = self.trail.pop().ok_or(CoreError::NothingToRetract)?;
        let undo = self.undo.pop().expect("undo log mirrors the trail");
        // An unassigned variable created after this assignment goes first.
        if self.variables.len() > var + 1 {
            self.variables.truncate(var + 1);
        }

        if undo.opened_meta {
            self.metas.pop();
            if let Some(id) = undo.completed_meta {
                self.metas[id].complete = false;
            }
        } else {
            let meta = self.metas.last_mut().expect("continuation had an owner");
            meta.member_ids.pop();
            meta.word.truncate(undo.prev_word_len);
            if undo.completed_current {
                meta.complete = false;
            }
        }

        self.sentence_index = undo.sentence_index;
        self.sentence_char_used = undo.sentence_char_used;
        self.sentence_word_count = undo.sentence_word_count;
        self.sentence_token_count = undo.sentence_token_count;

        let v = &mut self.variables[var];
        v.assignment = None;
        v.meta_id = None;
        Ok((var, token))
    }

    /// Words (meta-variables) of the current sentence, including an open one.
    pub fn current_sentence_words(&self) -> usize {
        if self.at_sentence_start() {
            return 0;
        }
        self.metas
            .iter()
            .rev()
            .take_while(|m| m.sentence == self.sentence_index)
            .count()
    }

    /// The meta-variable still accepting continuation tokens, if any.
    pub fn open_meta(&self) -> Option<&MetaVariable> {
        if self.at_sentence_start() {
            return None;
        }
        self.metas.last().filter(|m| !m.complete)
    }

    /// Sum of assigned token scores.
    pub fn log_likelihood(&self) -> f64 {
        self.trail.iter().map(|(_, t)| t.score).sum()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.trail.iter().map(|(_, t)| t.surface.as_str())
    }
}

/// Renders the assignment as text.
pub fn render_text(state: &CspState) -> String {
    render_tokens(state.trail.iter().map(|(_, t)| (t.surface.as_str(), t.ends_sentence)))
}

/// Concatenates surfaces, dropping the leading separator of each sentence's
/// first token and joining sentences with one separator.
pub fn render_tokens<'a>(tokens: impl IntoIterator<Item = (&'a str, bool)>) -> String {
    let mut out = String::new();
    let mut at_start = true;
    for (surface, ends) in tokens {
        if at_start {
            if !out.is_empty() {
                out.push(WORD_SEPARATOR);
            }
            out.push_str(surface.strip_prefix(WORD_SEPARATOR).unwrap_or(surface));
        } else {
            out.push_str(surface);
        }
        at_start = ends;
    }
    let trimmed = out.trim_end_matches(WORD_SEPARATOR).len();
    out.truncate(trimmed);
    out
}

/// Encodes decision variables as `surface;` each. `;` and `\` inside a
/// surface are escaped with `\`.
pub fn serialize_assignment(state: &CspState) -> String {
    serialize_surfaces(state.surfaces())
}

pub fn serialize_surfaces<'a>(surfaces: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for s in surfaces {
        for c in s.chars() {
            if c == ';' || c == '\\' {
                out.push('\\');
            }
            out.push(c);
        }
        out.push(';');
    }
    out
}

/// Inverse of [`serialize_assignment`]: recovers the surface sequence.
pub fn parse_assignment(encoded: &str) -> Result<Vec<String>, CoreError> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = encoded.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some(e @ (';' | '\\')) => cur.push(e),
                Some(other) => {
                    return Err(CoreError::MalformedAssignment(format!(
                        "invalid escape \\{other}"
                    )))
                }
                None => {
                    return Err(CoreError::MalformedAssignment(
                        "dangling escape at end of input".into(),
                    ))
                }
            },
            ';' => {
                if cur.is_empty() {
                    return Err(CoreError::MalformedAssignment(format!(
                        "empty token at position {}",
                        out.len()
                    )));
                }
                out.push(std::mem::take(&mut cur));
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        return Err(CoreError::MalformedAssignment(format!(
            "unterminated token {cur:?}"
        )));
    }
    Ok(out)
}
