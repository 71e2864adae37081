//! Acceptance run: one PASS/FAIL line per criterion.

mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use gencp::bench::{
    mock_search_config, run_suite, scaled_tasks, to_csv_string, SuiteOptions, MOCK_CORPUS,
    SAMPLE_TEXTS,
};
use gencp::constraints::sum::SumWindow;
use gencp::constraints::CharSumPolicy;
use gencp::domain::{Domain, DomainSource};
use gencp::lm::{CallCounter, MockConfig, MockModel};
use gencp::preview::{admissible_sums, join_filter, Admissible, PreviewSnapshot};
use gencp::search::{solve, SearchConfig, Variant};
use gencp::state::{parse_assignment, serialize_surfaces};
use gencp::{bench, validate_solution, CspState, Token};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_instance, Brute};

type Outcome = Result<String, String>;

const RANDOM_INSTANCES: u64 = 60;
const MAX_POSITIONS: usize = 6;
const SEEDS: u64 = 20;

fn exhaustive_cfg(top_k: usize, variant: Variant) -> SearchConfig {
    SearchConfig {
        top_k,
        mlm_top_k: Some(1000),
        restart_on_solution: false,
        max_solutions: None,
        max_llm_calls: None,
        max_sentence_tokens: MAX_POSITIONS,
        variant,
        ..SearchConfig::default()
    }
}

fn mock(seed: u64) -> MockModel {
    MockModel::build(
        MOCK_CORPUS,
        MockConfig {
            seed,
            noise: 0.3,
            ..MockConfig::default()
        },
    )
    .expect("bundled corpus builds")
}

fn feasibility_soundness() -> Outcome {
    let start = Instant::now();
    let m = mock(0);
    let report = run_suite(
        &scaled_tasks(),
        &Variant::ALL,
        &SearchConfig {
            mlm_top_k: Some(1000),
            ..mock_search_config()
        },
        &m,
        Some(&m),
        SuiteOptions::default(),
    );
    let tasks = scaled_tasks();
    let mut bad = 0;
    for s in &report.solutions {
        let task = tasks.iter().find(|t| t.name == s.task_name).unwrap();
        if !validate_solution(&s.text, task, true).satisfied {
            bad += 1;
        }
    }
    let n = report.solutions.len();
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("{n} solutions, {bad} violations, {secs:.1}s");
    if n >= 100 && bad == 0 && secs < 60.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct PairedRun {
    oracle: BTreeSet<Vec<String>>,
    metavar: BTreeSet<Vec<String>>,
    preview: BTreeSet<Vec<String>>,
    nodes_metavar: u64,
    nodes_preview: u64,
}

fn paired_runs() -> Vec<PairedRun> {
    (0..RANDOM_INSTANCES)
        .map(|seed| {
            let inst = random_instance(seed, MAX_POSITIONS);
            let oracle = Brute {
                task: &inst.task,
                llm: &inst.mock,
                k: inst.top_k,
                max_sentence_tokens: MAX_POSITIONS,
                sentence_char_cap: None,
                count_spaces: true,
            }
            .solutions();
            let run = |v| {
                solve(&inst.task, &exhaustive_cfg(inst.top_k, v), &inst.mock, Some(&inst.mock))
                    .expect("mock search cannot fail")
            };
            let a = run(Variant::Metavar);
            let b = run(Variant::PreviewMlm);
            let set = |o: &gencp::SearchOutcome| o.solutions.iter().map(|s| s.tokens.clone()).collect();
            PairedRun {
                oracle,
                metavar: set(&a),
                preview: set(&b),
                nodes_metavar: a.metrics.nodes_expanded,
                nodes_preview: b.metrics.nodes_expanded,
            }
        })
        .collect()
}

fn oracle_equivalence(runs: &[PairedRun], secs: f64) -> Outcome {
    let mismatched = runs.iter().filter(|r| r.metavar != r.oracle).count();
    let total: usize = runs.iter().map(|r| r.oracle.len()).sum();
    let detail = format!(
        "{} instances, {total} oracle solutions, {mismatched} mismatches, {secs:.1}s",
        runs.len()
    );
    if runs.len() >= 50 && mismatched == 0 && secs < 120.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn preview_soundness(runs: &[PairedRun]) -> Outcome {
    let differ = runs.iter().filter(|r| r.preview != r.metavar).count();
    let more_nodes = runs
        .iter()
        .filter(|r| r.nodes_preview > r.nodes_metavar)
        .count();
    let saved: u64 = runs.iter().map(|r| r.nodes_metavar - r.nodes_preview.min(r.nodes_metavar)).sum();
    let detail = format!(
        "{differ} solution-set differences, {more_nodes} instances with more nodes, {saved} nodes saved"
    );
    if differ == 0 && more_nodes == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn pathological_case() -> Outcome {
    let set = |v: &[usize]| v.iter().copied().collect::<BTreeSet<_>>();
    let snap = PreviewSnapshot {
        depth: 2,
        domains: vec![],
        length_sets: vec![set(&[3, 4, 7]), set(&[3, 5, 7])],
        wiped_out_at: None,
    };
    let sums = admissible_sums(&snap, SumWindow::exact(10));
    let expect: BTreeSet<Vec<usize>> = [vec![3, 7], vec![7, 3]].into();
    // mid-sentence tokens costing 3, 4, 7 and 9
    let state = CspState::from_surfaces([" Mid"], true).unwrap();
    let current = Domain::ordered(
        [" ab", " abc", " abcdef", " abcdefgh"]
            .iter()
            .map(|s| Token::new(*s, 0.0).unwrap())
            .collect(),
        DomainSource::Autoregressive,
    );
    let kept = join_filter(&state, &current, &Admissible::Tuples(sums.clone()), &CharSumPolicy::default());
    let costs: Vec<usize> = kept.iter().map(|t| t.char_len).collect();
    let detail = format!("sums {sums:?}, surviving costs {costs:?}");
    if sums == expect && costs == vec![3, 7] {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn directional_trend() -> Outcome {
    let tasks: Vec<_> = scaled_tasks()
        .into_iter()
        .filter(|t| matches!(t.name.as_str(), "sent1-scaled" | "para2-scaled"))
        .collect();
    let mut lines = Vec::new();
    let mut ok = true;
    for task in &tasks {
        let mut means = [0.0f64; 2];
        let mut inverted = 0;
        for seed in 0..SEEDS {
            let m = mock(seed);
            let per_solution = |v| {
                let cfg = SearchConfig {
                    variant: v,
                    mlm_top_k: Some(1000),
                    seed,
                    ..mock_search_config()
                };
                let out = solve(task, &cfg, &m, Some(&m)).expect("mock search cannot fail");
                out.metrics.llm_calls as f64 / out.metrics.solutions.max(1) as f64
            };
            let a = per_solution(Variant::Metavar);
            let b = per_solution(Variant::PreviewMlm);
            means[0] += a / SEEDS as f64;
            means[1] += b / SEEDS as f64;
            if b >= a {
                inverted += 1;
            }
        }
        ok &= means[1] < means[0];
        lines.push(format!(
            "{}: previewMLM {:.1} vs metavar {:.1} LLM calls/solution ({inverted}/{SEEDS} seeds inverted)",
            task.name, means[1], means[0]
        ));
    }
    if ok {
        Ok(lines.join("; "))
    } else {
        Err(lines.join("; "))
    }
}

fn counter_integrity() -> Outcome {
    let counted = CallCounter::new(mock(0));
    let cfg = SearchConfig {
        mlm_top_k: Some(1000),
        ..mock_search_config()
    };
    let mut llm = 0;
    let mut mlm = 0;
    for task in scaled_tasks() {
        let out = solve(&task, &cfg, &counted, Some(&counted)).expect("mock search cannot fail");
        llm += out.metrics.llm_calls;
        mlm += out.metrics.mlm_calls;
    }
    let detail = format!(
        "metrics {llm}/{mlm}, instrumented {}/{} (LLM/MLM)",
        counted.llm_calls(),
        counted.mlm_calls()
    );
    if llm == counted.llm_calls() && mlm == counted.mlm_calls() && mlm > 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn determinism() -> Outcome {
    let run = |jobs| {
        let m = mock(7);
        let report = run_suite(
            &scaled_tasks(),
            &Variant::ALL,
            &mock_search_config(),
            &m,
            Some(&m),
            SuiteOptions {
                jobs,
                frozen_clock: true,
            },
        );
        let stream: String = report
            .solutions
            .iter()
            .map(|s| serde_json::to_string(s).unwrap() + "\n")
            .collect();
        (to_csv_string(&report), stream)
    };
    let (csv_a, sols_a) = run(1);
    let (csv_b, sols_b) = run(3);
    let detail = format!(
        "CSV {} bytes, solution stream {} bytes",
        csv_a.len(),
        sols_a.len()
    );
    if csv_a == csv_b && sols_a == sols_b {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn serialization_fidelity() -> Outcome {
    let tokens = ["Us", "ing", " a", " transform", "er"];
    let encoded = serialize_surfaces(tokens);
    if encoded != "Us;ing; a; transform;er;" {
        return Err(format!("encoded as {encoded:?}"));
    }
    if parse_assignment(&encoded).unwrap() != tokens {
        return Err("example does not parse back".into());
    }
    let alphabet: Vec<char> = "ab ;\\.xé".chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(0..8);
        let seq: Vec<String> = (0..n)
            .map(|_| {
                let len = rng.gen_range(1..6);
                (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
            })
            .collect();
        let back = parse_assignment(&serialize_surfaces(seq.iter().map(String::as_str)));
        if back.as_ref() != Ok(&seq) {
            mismatches += 1;
        }
    }
    let detail = format!("example verbatim, 1000 random round-trips, {mismatches} mismatches");
    if mismatches == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sample_audit() -> Outcome {
    let tasks = bench::builtin_tasks();
    let mut lines = Vec::new();
    for (name, text) in SAMPLE_TEXTS {
        let task = tasks.iter().find(|t| t.name == name).unwrap();
        for count_spaces in [true, false] {
            let r = validate_solution(text, task, count_spaces);
            let measured: Vec<String> = r
                .violations
                .iter()
                .map(|v| format!("{}@{:?} expected {} measured {}", v.constraint, v.sentence, v.expected, v.measured))
                .collect();
            lines.push(format!(
                "  {name} count_spaces={count_spaces}: {}{}",
                if r.satisfied { "satisfied" } else { "violated" },
                if measured.is_empty() { String::new() } else { format!(" [{}]", measured.join("; ")) }
            ));
        }
    }
    Ok(format!("informational\n{}", lines.join("\n")))
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, outcome: Outcome| {
        match outcome {
            Ok(detail) => println!("PASS criterion {n} ({name}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): {detail}");
            }
        }
    };

    report(1, "feasibility soundness", feasibility_soundness());
    let start = Instant::now();
    let runs = paired_runs();
    let secs = start.elapsed().as_secs_f64();
    report(2, "oracle equivalence", oracle_equivalence(&runs, secs));
    report(3, "preview soundness", preview_soundness(&runs));
    report(4, "pathological sum case", pathological_case());
    report(5, "directional trend", directional_trend());
    report(6, "counter integrity", counter_integrity());
    report(7, "determinism", determinism());
    report(8, "serialization fidelity", serialization_fidelity());
    report(9, "sample audit", sample_audit());

    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
