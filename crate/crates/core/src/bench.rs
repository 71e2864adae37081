//! The six benchmark tasks, their scaled-down mock counterparts, and a suite
//! runner producing one report row per (task, variant).

use std::io;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintSpec, SentenceScope};
use crate::lm::{LanguageModel, MaskedModel};
use crate::search::{
    solve_with, Clock, FrozenClock, SearchConfig, Solution, SystemClock, Variant,
};
use crate::task::TaskSpec;

/// Fantasy pre-prompt used by every builtin task.
pub const FANTASY_PREPROMPT: &str = "Amidst the crimson glow of a setting sun, a lone warrior, \
clad in battle-worn silver, stood atop the ancient ruins, his blade gleaming with the promise \
of legend.";

/// Small comma-free fantasy corpus for the mock backend.
pub const MOCK_CORPUS: &str = include_str!("../data/fantasy.txt");

/// Sample outputs of the reference system, one per builtin task.
pub const SAMPLE_TEXTS: [(&str, &str); 6] = [
    (
        "sent-1",
        "His eyes sparkled as he stared into the void, awaiting the arrival of an immortal.",
    ),
    (
        "para-2",
        "With an arm raised in triumph, he raised himself once again. The sun had shifted its \
position, casting a shadow on earth.",
    ),
    (
        "para-3",
        "The warrior had been on the battlefield for at least a dozen years, fighting and dying \
with the forces of the Empire against the growing power of the Orcs. He was the last in a line \
of warriors that had fought on the front. The orcish king was dead, his son and grandson had \
been killed in a ruthless battle.",
    ),
    (
        "para-4",
        "The warrior was an ancient warrior, known to many as The Sword of Justice. His name is \
known to all, but he is known, mostly, throughout the lands.",
    ),
    (
        "para-5",
        "Dragons raised into the sky, one of which bore a striking resemblance to the dragons of \
myth, were beginning to circle in the sky above. Kingdoms trembled, while the mighty nations of \
the world sat abed, awaiting the day's end. Barbarians with swords and axes drew together, their \
bloodlust and greed being satisfied one final time.",
    ),
    (
        "para-6",
        "He stood watching, waiting, as an eerie silence filled his mind. His soul was trapped in \
a timeless battle, between desire, truth, love, hate, fear, anger, lust, greed, envy, cowardice, \
pride, ambition, pride, lust, revenge, forgiveness, jealousy, rage, lust, hatred, ignorance, \
stupidity, ignorance, stupidity, etc. He was battling for his very soul. This was his life.",
    ),
];

fn words(scope: SentenceScope, min: usize, max: Option<usize>) -> ConstraintSpec {
    ConstraintSpec::WordCount { scope, min, max }
}

fn chars(min: usize, max: usize) -> ConstraintSpec {
    ConstraintSpec::CharSum {
        scope: SentenceScope::All,
        target_min: min,
        target_max: max,
    }
}

fn keywords(list: &[&str]) -> Vec<ConstraintSpec> {
    list.iter()
        .enumerate()
        .map(|(sentence, k)| ConstraintSpec::PrefixKeyword {
            sentence,
            keyword: k.to_string(),
        })
        .collect()
}

fn task(name: &str, sentences: usize, constraints: Vec<ConstraintSpec>) -> TaskSpec {
    TaskSpec::new(name, FANTASY_PREPROMPT, sentences, constraints)
}

/// The six tasks at their original scale.
pub fn builtin_tasks() -> Vec<TaskSpec> {
    use SentenceScope::All;
    vec![
        task("sent-1", 1, vec![chars(82, 82)]),
        task("para-2", 2, vec![words(All, 10, Some(15)), chars(60, 60)]),
        task("para-3", 3, vec![words(All, 15, None)]),
        task("para-4", 2, vec![words(All, 14, Some(14)), chars(72, 74)]),
        task("para-5", 3, keywords(&["Dragons", "Kingdoms", "Barbarians"])),
        task("para-6", 4, vec![ConstraintSpec::forbidden_words(["the", "and", "of"])]),
    ]
}

/// Smaller targets that the bundled mock corpus can satisfy in seconds.
pub fn scaled_tasks() -> Vec<TaskSpec> {
    use SentenceScope::All;
    vec![
        task("sent1-scaled", 1, vec![chars(32, 32)]),
        task("para2-scaled", 2, vec![words(All, 4, Some(6)), chars(28, 28)]),
        task("para3-scaled", 3, vec![words(All, 6, None)]),
        task("para4-scaled", 2, vec![words(All, 5, Some(5)), chars(26, 28)]),
        task("para5-scaled", 3, keywords(&["Dragons", "Kingdoms", "Barbarians"])),
        task("para6-scaled", 4, vec![ConstraintSpec::forbidden_words(["the", "and", "of"])]),
    ]
}

/// Search settings sized for the scaled tasks and the bundled corpus: a
/// smaller top-k, and a longest word of 12 characters, which covers the
/// corpus and keeps preview to the end of each sentence.
pub fn mock_search_config() -> SearchConfig {
    SearchConfig {
        top_k: 8,
        max_word_len: 12,
        max_solutions: Some(10),
        max_llm_calls: Some(20_000),
        ..SearchConfig::default()
    }
}

/// Looks up a builtin or scaled task by name.
pub fn find_task(name: &str) -> Option<TaskSpec> {
    builtin_tasks()
        .into_iter()
        .chain(scaled_tasks())
        .find(|t| t.name == name)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRow {
    pub task: String,
    pub variant: Variant,
    pub depth: usize,
    pub llm_calls: u64,
    pub mlm_calls: u64,
    pub backtracks: u64,
    pub solutions: u64,
    pub wall_ms: u64,
    /// `ok`, or `error: <message>` for a cell that aborted.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunReport {
    pub rows: Vec<RunRow>,
    /// Every emitted solution, in cell order.
    pub solutions: Vec<Solution>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteOptions {
    /// Cells run in parallel on this many threads.
    pub jobs: usize,
    /// Report zero elapsed time so reports are byte-reproducible.
    pub frozen_clock: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            jobs: 1,
            frozen_clock: false,
        }
    }
}

type Cell = (RunRow, Vec<Solution>);

/// Runs every (task, variant) cell under the same config and backends.
pub fn run_suite(
    tasks: &[TaskSpec],
    variants: &[Variant],
    cfg: &SearchConfig,
    llm: &dyn LanguageModel,
    mlm: Option<&dyn MaskedModel>,
    options: SuiteOptions,
) -> RunReport {
    let cells: Vec<(usize, &TaskSpec, Variant)> = tasks
        .iter()
        .flat_map(|t| variants.iter().map(move |v| (t, *v)))
        .enumerate()
        .map(|(i, (t, v))| (i, t, v))
        .collect();
    let results: Mutex<Vec<Option<Cell>>> = Mutex::new(vec![None; cells.len()]);
    let next = Mutex::new(0usize);

    let worker = || loop {
        let i = {
            let mut n = next.lock().expect("suite queue poisoned");
            if *n >= cells.len() {
                return;
            }
            *n += 1;
            *n - 1
        };
        let (_, task, variant) = cells[i];
        let cell = run_cell(task, variant, cfg, llm, mlm, options.frozen_clock);
        results.lock().expect("suite results poisoned")[i] = Some(cell);
    };

    let jobs = options.jobs.max(1).min(cells.len().max(1));
    if jobs == 1 {
        worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..jobs {
                s.spawn(worker);
            }
        });
    }

    let mut report = RunReport::default();
    for cell in results.into_inner().expect("suite results poisoned") {
        let (row, sols) = cell.expect("every cell ran");
        report.rows.push(row);
        report.solutions.extend(sols);
    }
    report
}

fn run_cell(
    task: &TaskSpec,
    variant: Variant,
    cfg: &SearchConfig,
    llm: &dyn LanguageModel,
    mlm: Option<&dyn MaskedModel>,
    frozen: bool,
) -> (RunRow, Vec<Solution>) {
    let cfg = SearchConfig {
        variant,
        ..cfg.clone()
    };
    let system = SystemClock::start();
    let clock: &dyn Clock = if frozen { &FrozenClock } else { &system };
    let depth = if variant == Variant::PreviewMlm {
        cfg.preview_depth
    } else {
        0
    };
    let (metrics, solutions, status) = match solve_with(task, &cfg, llm, mlm, clock, &mut ()) {
        Ok(out) => (out.metrics, out.solutions, "ok".to_string()),
        Err(f) => (f.metrics, f.solutions, format!("error: {}", f.error)),
    };
    let row = RunRow {
        task: task.name.clone(),
        variant,
        depth,
        llm_calls: metrics.llm_calls,
        mlm_calls: metrics.mlm_calls,
        backtracks: metrics.backtracks,
        solutions: metrics.solutions,
        wall_ms: metrics.wall_ms,
        status,
    };
    (row, solutions)
}

/// Writes the report as CSV with a header row.
pub fn write_csv<W: io::Write>(report: &RunReport, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for row in &report.rows {
        w.serialize(row)?;
    }
    if report.rows.is_empty() {
        w.write_record([
            "task",
            "variant",
            "depth",
            "llm_calls",
            "mlm_calls",
            "backtracks",
            "solutions",
            "wall_ms",
            "status",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(report: &RunReport) -> String {
    let mut buf = Vec::new();
    write_csv(report, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is UTF-8")
}

pub fn parse_csv(text: &str) -> Result<Vec<RunRow>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect()
}
