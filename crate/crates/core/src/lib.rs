//! Constraint-guided text generation as a dynamic constraint satisfaction
//! problem. A left-to-right language model proposes token domains, a masked
//! model previews the domains of upcoming words, and propagation plus
//! chronological backtracking keep only text that satisfies every constraint.

pub mod bench;
pub mod constraints;
pub mod domain;
pub mod error;
pub mod lm;
pub mod preview;
pub mod search;
pub mod state;
pub mod task;
pub mod token;

pub use constraints::{validate_solution, ConstraintSpec, SentenceScope, ValidationReport};
pub use domain::{Domain, DomainSource};
pub use error::{BackendError, CoreError, SearchError, TaskError};
pub use state::{init_state, parse_assignment, render_text, serialize_assignment, CspState};
pub use task::{TaskBudget, TaskSpec};
pub use token::Token;
pub use search::{solve, solve_with, Metrics, SearchConfig, SearchOutcome, Solution, Variant};
