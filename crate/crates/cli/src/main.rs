use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{ArgAction, Args, Parser, Subcommand};
use serde::Serialize;

use gencp::bench::{self, RunReport, SuiteOptions};
use gencp::error::{BackendError, SearchError};
use gencp::lm::{LanguageModel, MaskedModel, MockConfig, MockModel};
use gencp::search::{solve_with, Clock, FrozenClock, Observer, SystemClock};
use gencp::{validate_solution, Metrics, SearchConfig, Solution, TaskSpec, Variant};
use gencp_clients::{EndpointConfig, HttpLanguageModel, HttpMaskedModel};

const EXIT_NO_SOLUTIONS: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_BACKEND: u8 = 3;

#[derive(Parser)]
#[command(name = "gencp", version, about = "Constraint-guided text generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one task and stream its solutions.
    Run(RunArgs),
    /// Run every (task, variant) cell and write a CSV report.
    Suite(SuiteArgs),
    /// Check a text against a task's constraints.
    Validate(ValidateArgs),
}

#[derive(Args)]
#[group(id = "source", required = true, multiple = false)]
struct TaskSource {
    /// Builtin task name (sent-1 … para-6, or a *-scaled variant).
    #[arg(long, group = "source")]
    builtin: Option<String>,
    /// Task file in JSON.
    #[arg(long, group = "source")]
    task: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, default_value = "previewMLM")]
    variant: Variant,
    /// Preview depth.
    #[arg(long, default_value_t = 2)]
    depth: usize,
    #[arg(long, default_value_t = 50)]
    top_k: usize,
    /// Candidates per mask (defaults to --top-k).
    #[arg(long)]
    mlm_top_k: Option<usize>,
    #[arg(long, default_value_t = 0.8)]
    temperature: f64,
    #[arg(long)]
    max_llm_calls: Option<u64>,
    #[arg(long)]
    max_solutions: Option<usize>,
    #[arg(long)]
    max_time_ms: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    count_spaces: bool,
    /// Start over from an empty assignment after each solution.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    restart: bool,
    /// Longest word assumed by the length reasoning.
    #[arg(long, default_value_t = 20)]
    max_word_len: usize,
    #[arg(long, default_value_t = 64)]
    max_sentence_tokens: usize,
    /// Prune prefixes whose mean token log-likelihood falls below this.
    #[arg(long)]
    likelihood_floor: Option<f64>,
    /// Report zero elapsed time (reproducible output).
    #[arg(long)]
    frozen_clock: bool,
}

impl SearchArgs {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            top_k: self.top_k,
            mlm_top_k: self.mlm_top_k,
            temperature: self.temperature,
            preview_depth: self.depth,
            preview_trigger_budget: None,
            max_llm_calls: self.max_llm_calls,
            max_solutions: self.max_solutions,
            max_wall_ms: self.max_time_ms,
            seed: self.seed,
            restart_on_solution: self.restart,
            likelihood_floor: self.likelihood_floor,
            variant: self.variant,
            count_spaces: self.count_spaces,
            max_word_len: self.max_word_len,
            max_sentence_tokens: self.max_sentence_tokens,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum BackendKind {
    Mock,
    Http,
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value = "mock")]
    backend: BackendKind,
    /// Mock corpus (defaults to the bundled fantasy corpus).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Mock n-gram order.
    #[arg(long, default_value_t = 2)]
    mock_order: usize,
    /// Amplitude of the mock's seeded score perturbation.
    #[arg(long, default_value_t = 0.0)]
    mock_noise: f64,
    /// Split mock words at least this long into two sub-word tokens.
    #[arg(long)]
    mock_split_min_len: Option<usize>,
    #[arg(long)]
    llm_url: Option<String>,
    #[arg(long)]
    mlm_url: Option<String>,
    #[arg(long, default_value = "babbage-002")]
    llm_model: String,
    #[arg(long, default_value = "bert-base-cased")]
    mlm_model: String,
    /// Cache HTTP responses within the run.
    #[arg(long, default_value_t = false, action = ArgAction::Set)]
    cache: bool,
    #[arg(long, default_value_t = 5)]
    max_retries: u32,
    #[arg(long, default_value_t = 30_000)]
    timeout_ms: u64,
    /// Requests per second per endpoint.
    #[arg(long)]
    max_rps: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: TaskSource,
    #[command(flatten)]
    search: SearchArgs,
    #[command(flatten)]
    backend: BackendArgs,
    /// Solution records, one JSON object per line (default: stdout).
    #[arg(long)]
    solutions: Option<PathBuf>,
    /// Final metrics as JSON.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct SuiteArgs {
    /// Builtin task names; repeatable. Without any task, the scaled set runs.
    #[arg(long)]
    builtin: Vec<String>,
    /// Task files; repeatable.
    #[arg(long)]
    task: Vec<PathBuf>,
    /// Run the six tasks at full scale instead of the scaled set.
    #[arg(long, conflicts_with_all = ["builtin", "task"])]
    full_scale: bool,
    #[arg(long, value_delimiter = ',', default_value = "vanilla,metavar,previewMLM")]
    variants: Vec<Variant>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    search: SearchArgs,
    #[command(flatten)]
    backend: BackendArgs,
    /// CSV report (default: stdout).
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Solution records of every cell.
    #[arg(long)]
    solutions: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    source: TaskSource,
    /// File holding the text to check.
    #[arg(long)]
    text: PathBuf,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    count_spaces: bool,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

/// An error together with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        error: error.into(),
    }
}

fn backend_code(e: &BackendError) -> u8 {
    match e {
        BackendError::Config(_) | BackendError::Credentials(_) => EXIT_USAGE,
        _ => EXIT_BACKEND,
    }
}

fn search_code(e: &SearchError) -> u8 {
    match e {
        SearchError::Config(_) => EXIT_USAGE,
        SearchError::Backend(b) => backend_code(b),
        SearchError::Core(_) => EXIT_BACKEND,
    }
}

fn load_task(builtin: Option<&str>, file: Option<&Path>) -> Result<TaskSpec, Failure> {
    match (builtin, file) {
        (Some(name), _) => bench::find_task(name)
            .ok_or_else(|| usage(anyhow::anyhow!("unknown builtin task `{name}`"))),
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(usage)?;
            TaskSpec::from_json(&text)
                .with_context(|| format!("in {}", path.display()))
                .map_err(usage)
        }
        (None, None) => Err(usage(anyhow::anyhow!("no task given"))),
    }
}

struct Backends {
    llm: Box<dyn LanguageModel>,
    mlm: Option<Box<dyn MaskedModel>>,
}

fn endpoint(mut cfg: EndpointConfig, args: &BackendArgs) -> EndpointConfig {
    cfg.cache = args.cache;
    cfg.max_retries = args.max_retries;
    cfg.timeout_ms = args.timeout_ms;
    cfg.max_rps = args.max_rps;
    cfg
}

fn build_backends(args: &BackendArgs, search: &SearchConfig, variants: &[Variant]) -> Result<Backends, Failure> {
    match args.backend {
        BackendKind::Mock => {
            let corpus = match &args.corpus {
                Some(p) => fs::read_to_string(p)
                    .with_context(|| format!("reading corpus {}", p.display()))
                    .map_err(usage)?,
                None => bench::MOCK_CORPUS.to_string(),
            };
            let cfg = MockConfig {
                n: args.mock_order,
                seed: search.seed,
                split_min_len: args.mock_split_min_len,
                noise: args.mock_noise,
                ..MockConfig::default()
            };
            let mock = std::sync::Arc::new(MockModel::build(&corpus, cfg).map_err(usage)?);
            Ok(Backends {
                llm: Box::new(std::sync::Arc::clone(&mock)),
                mlm: Some(Box::new(mock)),
            })
        }
        BackendKind::Http => {
            let url = args
                .llm_url
                .as_deref()
                .ok_or_else(|| usage(anyhow::anyhow!("--backend http requires --llm-url")))?;
            let llm_cfg = endpoint(EndpointConfig::completions(url, &args.llm_model), args);
            llm_cfg.check().map_err(usage)?;
            llm_cfg.api_key().map_err(usage)?;
            let wants_mlm = variants.contains(&Variant::PreviewMlm) && search.preview_depth > 0;
            let mlm: Option<Box<dyn MaskedModel>> = match (&args.mlm_url, wants_mlm) {
                (Some(u), _) => {
                    let c = endpoint(EndpointConfig::fill_mask(u, &args.mlm_model), args);
                    c.api_key().map_err(usage)?;
                    Some(Box::new(HttpMaskedModel::new(c).map_err(usage)?))
                }
                (None, true) => {
                    return Err(usage(anyhow::anyhow!(
                        "the previewMLM variant needs --mlm-url with --backend http"
                    )))
                }
                (None, false) => None,
            };
            Ok(Backends {
                llm: Box::new(HttpLanguageModel::new(llm_cfg).map_err(usage)?),
                mlm,
            })
        }
    }
}

#[derive(Serialize)]
struct SolutionRecord<'a> {
    task: &'a str,
    text: &'a str,
    log_likelihood: f64,
    llm_calls: u64,
    mlm_calls: u64,
    backtracks: u64,
    elapsed_ms: u64,
}

fn record_line(s: &Solution) -> String {
    let m = &s.metrics_at_emit;
    let rec = SolutionRecord {
        task: &s.task_name,
        text: &s.text,
        log_likelihood: s.log_likelihood,
        llm_calls: m.llm_calls,
        mlm_calls: m.mlm_calls,
        backtracks: m.backtracks,
        elapsed_ms: m.wall_ms,
    };
    let mut line = serde_json::to_string(&rec).expect("records serialize");
    line.push('\n');
    line
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p)
                .with_context(|| format!("creating {}", p.display()))
                .map_err(usage)?,
        )),
        None => Box::new(io::stdout()),
    })
}

/// Writes each solution as one whole line as soon as it is found.
struct Stream {
    out: Box<dyn Write>,
    error: Option<io::Error>,
}

impl Observer for Stream {
    fn on_solution(&mut self, s: &Solution) {
        if self.error.is_some() {
            return;
        }
        let r = self
            .out
            .write_all(record_line(s).as_bytes())
            .and_then(|()| self.out.flush());
        self.error = r.err();
    }
}

fn header(command: &str, task: &str, cfg: &SearchConfig, backend: &BackendArgs) {
    eprintln!(
        "gencp {command}: task={task} variant={} top_k={} mlm_top_k={} temperature={} depth={} \
         seed={} count_spaces={} restart={} max_word_len={} max_sentence_tokens={} \
         max_llm_calls={} max_solutions={} max_time_ms={} backend={} cache={}",
        cfg.variant,
        cfg.top_k,
        cfg.mlm_top_k.unwrap_or(cfg.top_k),
        cfg.temperature,
        cfg.preview_depth,
        cfg.seed,
        cfg.count_spaces,
        cfg.restart_on_solution,
        cfg.max_word_len,
        cfg.max_sentence_tokens,
        show(cfg.max_llm_calls),
        show(cfg.max_solutions),
        show(cfg.max_wall_ms),
        match backend.backend {
            BackendKind::Mock => "mock",
            BackendKind::Http => "http",
        },
        backend.cache,
    );
}

fn show<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "none".into(), |v| v.to_string())
}

#[derive(Serialize)]
struct RunMetrics<'a> {
    task: &'a str,
    variant: Variant,
    stop: Option<gencp::search::StopReason>,
    error: Option<String>,
    metrics: Metrics,
    config: &'a SearchConfig,
}

fn run(args: RunArgs) -> Result<u8, Failure> {
    let task = load_task(args.source.builtin.as_deref(), args.source.task.as_deref())?;
    let cfg = args.search.config();
    cfg.check().map_err(usage)?;
    header("run", &task.name, &cfg, &args.backend);
    let backends = build_backends(&args.backend, &cfg, &[cfg.variant])?;

    let mut stream = Stream {
        out: open_output(args.solutions.as_deref())?,
        error: None,
    };
    let system = SystemClock::start();
    let clock: &dyn Clock = if args.search.frozen_clock { &FrozenClock } else { &system };
    let result = solve_with(
        &task,
        &cfg,
        backends.llm.as_ref(),
        backends.mlm.as_deref(),
        clock,
        &mut stream,
    );
    if let Some(e) = stream.error {
        return Err(Failure {
            code: EXIT_USAGE,
            error: anyhow::Error::new(e).context("writing solutions"),
        });
    }

    let (metrics, stop, error, code) = match &result {
        Ok(out) => {
            let code = if out.solutions.is_empty() { EXIT_NO_SOLUTIONS } else { 0 };
            (out.metrics, Some(out.stop), None, code)
        }
        Err(f) => (f.metrics, None, Some(f.error.to_string()), search_code(&f.error)),
    };
    if let Some(path) = &args.metrics {
        let m = RunMetrics {
            task: &task.name,
            variant: cfg.variant,
            stop,
            error: error.clone(),
            metrics,
            config: &cfg,
        };
        let text = serde_json::to_string_pretty(&m).expect("metrics serialize");
        fs::write(path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))
            .map_err(usage)?;
    }
    eprintln!(
        "gencp run: {} solutions, {} LLM calls, {} MLM calls, {} backtracks, {} ms",
        metrics.solutions, metrics.llm_calls, metrics.mlm_calls, metrics.backtracks, metrics.wall_ms
    );
    if let Some(e) = error {
        eprintln!("error: {e}");
    }
    Ok(code)
}

fn suite(args: SuiteArgs) -> Result<u8, Failure> {
    let mut tasks = Vec::new();
    for name in &args.builtin {
        tasks.push(load_task(Some(name), None)?);
    }
    for path in &args.task {
        tasks.push(load_task(None, Some(path))?);
    }
    if tasks.is_empty() {
        tasks = if args.full_scale {
            bench::builtin_tasks()
        } else {
            bench::scaled_tasks()
        };
    }
    let cfg = args.search.config();
    cfg.check().map_err(usage)?;
    let names: Vec<&str> = tasks.iter().map(|t| t.name.as_str()).collect();
    header("suite", &names.join(","), &cfg, &args.backend);
    let backends = build_backends(&args.backend, &cfg, &args.variants)?;

    let report: RunReport = bench::run_suite(
        &tasks,
        &args.variants,
        &cfg,
        backends.llm.as_ref(),
        backends.mlm.as_deref(),
        SuiteOptions {
            jobs: args.jobs,
            frozen_clock: args.search.frozen_clock,
        },
    );

    let out = open_output(args.metrics.as_deref())?;
    bench::write_csv(&report, out)
        .context("writing report")
        .map_err(usage)?;
    if let Some(path) = &args.solutions {
        let mut out = open_output(Some(path))?;
        for s in &report.solutions {
            out.write_all(record_line(s).as_bytes())
                .and_then(|()| out.flush())
                .context("writing solutions")
                .map_err(usage)?;
        }
    }

    let failed: Vec<&str> = report
        .rows
        .iter()
        .filter(|r| r.status != "ok")
        .map(|r| r.status.as_str())
        .collect();
    for f in &failed {
        eprintln!("cell {f}");
    }
    Ok(if !failed.is_empty() {
        EXIT_BACKEND
    } else if report.solutions.is_empty() {
        EXIT_NO_SOLUTIONS
    } else {
        0
    })
}

fn validate(args: ValidateArgs) -> Result<u8, Failure> {
    let task = load_task(args.source.builtin.as_deref(), args.source.task.as_deref())?;
    let text = fs::read_to_string(&args.text)
        .with_context(|| format!("reading {}", args.text.display()))
        .map_err(usage)?;
    let report = validate_solution(text.trim_end(), &task, args.count_spaces);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        for v in &report.violations {
            let at = v.sentence.map_or_else(String::new, |s| format!(" sentence {s}"));
            println!("{}{at}: expected {}, measured {}", v.constraint, v.expected, v.measured);
        }
        println!("{} violation(s)", report.violations.len());
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Suite(a) => suite(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
