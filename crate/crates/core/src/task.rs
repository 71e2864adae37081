//! Task definitions and the JSON task-file format.
//!
//! ```json
//! {
//!   "name": "para-4",
//!   "preprompt": "…",
//!   "sentences": 2,
//!   "constraints": [
//!     {"type": "word_count", "sentence": "all", "min": 14, "max": 14},
//!     {"type": "char_sum", "sentence": "all", "min": 72, "max": 74}
//!   ]
//! }
//! ```
//!
//! Constraint entries: `char_sum` (`target`, or `min` and `max`), `word_count`
//! (`min`, optional `max`), `sentence_count` (`n`), `prefix_keyword`
//! (`sentence`, `keyword`), `forbidden_words` (`words`), `letter_exclusion`
//! (`letters`, a string or a list of one-character strings). `sentence` is a
//! 0-based ordinal or `"all"` and defaults to `"all"` where it applies.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::constraints::{ConstraintSpec, SentenceScope};
use crate::error::TaskError;

/// Optional limits carried by a task; the search config may tighten them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskBudget {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_llm_calls: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_solutions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_wall_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSpec {
    pub name: String,
    pub preprompt: String,
    pub sentences: usize,
    pub constraints: Vec<ConstraintSpec>,
    pub budget: Option<TaskBudget>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    name: String,
    #[serde(default)]
    preprompt: String,
    sentences: usize,
    #[serde(default)]
    constraints: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    budget: Option<TaskBudget>,
}

impl TaskSpec {
    pub fn new(
        name: impl Into<String>,
        preprompt: impl Into<String>,
        sentences: usize,
        constraints: Vec<ConstraintSpec>,
    ) -> Self {
        Self {
            name: name.into(),
            preprompt: preprompt.into(),
            sentences,
            constraints,
            budget: None,
        }
    }

    pub fn with_budget(mut self, budget: TaskBudget) -> Self {
        self.budget = Some(budget);
        self
    }

    /// Checks field invariants and that every sentence ordinal is in range.
    pub fn check(&self) -> Result<(), TaskError> {
        if self.sentences == 0 {
            return Err(TaskError::Schema {
                location: "sentences".into(),
                message: "must be >= 1".into(),
            });
        }
        for (i, c) in self.constraints.iter().enumerate() {
            let location = format!("constraints[{i}]");
            c.check().map_err(|message| TaskError::Schema {
                location: location.clone(),
                message,
            })?;
            let ordinal = match c {
                ConstraintSpec::CharSum {
                    scope: SentenceScope::Sentence(s),
                    ..
                }
                | ConstraintSpec::WordCount {
                    scope: SentenceScope::Sentence(s),
                    ..
                }
                | ConstraintSpec::PrefixKeyword { sentence: s, .. } => Some(*s),
                _ => None,
            };
            if let Some(s) = ordinal.filter(|s| *s >= self.sentences) {
                return Err(TaskError::Schema {
                    location,
                    message: format!(
                        "sentence {s} out of range for a {}-sentence task",
                        self.sentences
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, TaskError> {
        let file: TaskFile = serde_json::from_str(text).map_err(|e| TaskError::Schema {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        let constraints = file
            .constraints
            .iter()
            .enumerate()
            .map(|(i, v)| {
                constraint_from_value(v).map_err(|message| TaskError::Schema {
                    location: format!("constraints[{i}]"),
                    message,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let task = TaskSpec {
            name: file.name,
            preprompt: file.preprompt,
            sentences: file.sentences,
            constraints,
            budget: file.budget,
        };
        task.check()?;
        Ok(task)
    }

    pub fn to_json(&self) -> String {
        let file = TaskFile {
            name: self.name.clone(),
            preprompt: self.preprompt.clone(),
            sentences: self.sentences,
            constraints: self.constraints.iter().map(constraint_to_value).collect(),
            budget: self.budget,
        };
        serde_json::to_string_pretty(&file).expect("task serialization cannot fail")
    }
}

fn scope_value(scope: SentenceScope) -> Value {
    match scope {
        SentenceScope::All => json!("all"),
        SentenceScope::Sentence(s) => json!(s),
    }
}

fn constraint_to_value(c: &ConstraintSpec) -> Value {
    match c {
        ConstraintSpec::CharSum {
            scope,
            target_min,
            target_max,
        } => json!({"type": "char_sum", "sentence": scope_value(*scope),
                    "min": target_min, "max": target_max}),
        ConstraintSpec::WordCount { scope, min, max } => {
            let mut v = json!({"type": "word_count", "sentence": scope_value(*scope), "min": min});
            if let Some(m) = max {
                v["max"] = json!(m);
            }
            v
        }
        ConstraintSpec::SentenceCount { n } => json!({"type": "sentence_count", "n": n}),
        ConstraintSpec::PrefixKeyword { sentence, keyword } => {
            json!({"type": "prefix_keyword", "sentence": sentence, "keyword": keyword})
        }
        ConstraintSpec::ForbiddenWords { words } => {
            json!({"type": "forbidden_words", "words": words})
        }
        ConstraintSpec::LetterExclusion { letters } => {
            json!({"type": "letter_exclusion", "letters": letters.iter().collect::<String>()})
        }
    }
}

struct Fields<'a> {
    map: &'a Map<String, Value>,
    used: Vec<&'static str>,
}

impl<'a> Fields<'a> {
    fn get(&mut self, key: &'static str) -> Option<&'a Value> {
        self.used.push(key);
        self.map.get(key)
    }

    fn usize(&mut self, key: &'static str) -> Result<Option<usize>, String> {
        match self.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_u64()
                .map(|n| Some(n as usize))
                .ok_or_else(|| format!("field `{key}` must be a non-negative integer")),
        }
    }

    fn required(&mut self, key: &'static str) -> Result<usize, String> {
        self.usize(key)?
            .ok_or_else(|| format!("missing field `{key}`"))
    }

    fn scope(&mut self) -> Result<SentenceScope, String> {
        match self.get("sentence") {
            None => Ok(SentenceScope::All),
            Some(Value::String(s)) if s == "all" => Ok(SentenceScope::All),
            Some(v) => v
                .as_u64()
                .map(|n| SentenceScope::Sentence(n as usize))
                .ok_or_else(|| "field `sentence` must be an ordinal or \"all\"".to_string()),
        }
    }

    fn finish(self) -> Result<(), String> {
        match self.map.keys().find(|k| !self.used.contains(&k.as_str())) {
            Some(k) => Err(format!("unknown field `{k}`")),
            None => Ok(()),
        }
    }
}

fn constraint_from_value(v: &Value) -> Result<ConstraintSpec, String> {
    let map = v.as_object().ok_or("constraint must be an object")?;
    let mut f = Fields {
        map,
        used: vec!["type"],
    };
    let kind = map
        .get("type")
        .and_then(Value::as_str)
        .ok_or("missing string field `type`")?;
    let spec = match kind {
        "char_sum" => {
            let scope = f.scope()?;
            let target = f.usize("target")?;
            let min = f.usize("min")?;
            let max = f.usize("max")?;
            let (target_min, target_max) = match (target, min, max) {
                (Some(t), None, None) => (t, t),
                (None, Some(lo), Some(hi)) => (lo, hi),
                _ => return Err("char_sum needs either `target` or both `min` and `max`".into()),
            };
            ConstraintSpec::CharSum {
                scope,
                target_min,
                target_max,
            }
        }
        "word_count" => {
            let scope = f.scope()?;
            let exact = f.usize("target")?;
            let min = f.usize("min")?;
            let max = f.usize("max")?;
            let (min, max) = match (exact, min) {
                (Some(t), None) if max.is_none() => (t, Some(t)),
                (None, Some(lo)) => (lo, max),
                (None, None) => (0, max),
                _ => return Err("word_count takes `target` or `min`/`max`, not both".into()),
            };
            ConstraintSpec::WordCount { scope, min, max }
        }
        "sentence_count" => ConstraintSpec::SentenceCount { n: f.required("n")? },
        "prefix_keyword" => {
            let sentence = f.required("sentence")?;
            let keyword = f
                .get("keyword")
                .and_then(Value::as_str)
                .ok_or("missing string field `keyword`")?
                .to_string();
            ConstraintSpec::PrefixKeyword { sentence, keyword }
        }
        "forbidden_words" => {
            let words = f
                .get("words")
                .and_then(Value::as_array)
                .ok_or("missing list field `words`")?
                .iter()
                .map(|w| w.as_str().map(str::to_string).ok_or("`words` must hold strings"))
                .collect::<Result<_, _>>()?;
            ConstraintSpec::ForbiddenWords { words }
        }
        "letter_exclusion" => {
            let letters = match f.get("letters") {
                Some(Value::String(s)) => s.chars().collect(),
                Some(Value::Array(items)) => items
                    .iter()
                    .map(|l| {
                        let s = l.as_str().unwrap_or_default();
                        let mut cs = s.chars();
                        match (cs.next(), cs.next()) {
                            (Some(c), None) => Ok(c),
                            _ => Err("`letters` entries must be single characters"),
                        }
                    })
                    .collect::<Result<_, _>>()?,
                _ => return Err("missing field `letters`".into()),
            };
            ConstraintSpec::LetterExclusion { letters }
        }
        other => return Err(format!("unknown constraint type `{other}`")),
    };
    f.finish()?;
    spec.check()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_exact_and_range_forms() {
        let t = TaskSpec::from_json(
            r#"{"name":"x","sentences":2,"constraints":[
                {"type":"char_sum","target":60},
                {"type":"word_count","sentence":1,"min":10,"max":15},
                {"type":"letter_exclusion","letters":["e","Z"]}]}"#,
        )
        .unwrap();
        assert_eq!(t.constraints[0], ConstraintSpec::char_sum_exact(SentenceScope::All, 60));
        assert_eq!(
            t.constraints[1],
            ConstraintSpec::WordCount {
                scope: SentenceScope::Sentence(1),
                min: 10,
                max: Some(15)
            }
        );
        assert_eq!(t.constraints[2], ConstraintSpec::letter_exclusion(['Z', 'e']));
        assert_eq!(t.preprompt, "");
    }

    #[test]
    fn rejects_zero_sentences() {
        let e = TaskSpec::from_json(r#"{"name":"x","sentences":0}"#).unwrap_err();
        assert!(matches!(e, TaskError::Schema { ref location, .. } if location == "sentences"));
    }

    #[test]
    fn unknown_type_reports_position() {
        let e = TaskSpec::from_json(
            r#"{"name":"x","sentences":1,"constraints":[{"type":"char_sum","target":3},{"type":"rhyme"}]}"#,
        )
        .unwrap_err();
        match e {
            TaskError::Schema { location, message } => {
                assert_eq!(location, "constraints[1]");
                assert!(message.contains("rhyme"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(TaskSpec::from_json(r#"{"name":"x","sentences":1,"extra":1}"#).is_err());
        assert!(TaskSpec::from_json(
            r#"{"name":"x","sentences":1,"constraints":[{"type":"sentence_count","n":1,"m":2}]}"#
        )
        .is_err());
    }

    #[test]
    fn out_of_range_sentence_rejected() {
        let e = TaskSpec::from_json(
            r#"{"name":"x","sentences":2,"constraints":[{"type":"prefix_keyword","sentence":2,"keyword":"A"}]}"#,
        );
        assert!(e.is_err());
    }

    #[test]
    fn json_round_trip() {
        let t = TaskSpec::new(
            "mixed",
            "Once.",
            3,
            vec![
                ConstraintSpec::char_sum_exact(SentenceScope::Sentence(2), 40),
                ConstraintSpec::WordCount {
                    scope: SentenceScope::All,
                    min: 15,
                    max: None,
                },
                ConstraintSpec::SentenceCount { n: 3 },
                ConstraintSpec::PrefixKeyword {
                    sentence: 1,
                    keyword: "Kingdoms".into(),
                },
                ConstraintSpec::forbidden_words(["the", "and"]),
                ConstraintSpec::letter_exclusion(['e']),
            ],
        )
        .with_budget(TaskBudget {
            max_llm_calls: Some(100),
            ..TaskBudget::default()
        });
        assert_eq!(TaskSpec::from_json(&t.to_json()).unwrap(), t);
    }
}
