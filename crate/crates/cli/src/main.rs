use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dptree::dp_topdown::ScheduleKind;
use dptree::experiment::{self, ExperimentConfig, PreparedData};
use dptree::theory::{self, SplitterKind, WeakLearningParams};
use dptree::tree::Criterion;
use dptree::Error;
use serde::Deserialize;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "dptree", version, about = "Differentially private decision tree training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One seeded run of the first grid point; prints the result row as JSON.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Exact mechanisms, budget still charged.
        #[arg(long)]
        zero_noise: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Every run of the grid, streamed to a CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample-size bounds, sensitivities and the boosting recurrence.
    Theory {
        query: TheoryQuery,
        /// Inline JSON object or a path to one.
        #[arg(long)]
        params: String,
    },
    /// Per-cell mean and standard error of a result CSV.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TheoryQuery {
    Sensitivity,
    RnmBound,
    NoisycountsBound,
    Recurrence,
    Requirement,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SensitivityParams {
    criterion: Criterion,
    m: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundParams {
    zeta: f64,
    alpha: f64,
    delta: f64,
    h: usize,
    #[serde(default = "one")]
    k: usize,
}

fn one() -> usize {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecurrenceParams {
    epsilon: f64,
    gamma: f64,
    slowdown: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RequirementParams {
    gamma: f64,
    epsilon: f64,
    delta: f64,
    max_splits: u32,
    alpha: f64,
    #[serde(default = "one")]
    k: usize,
    #[serde(default)]
    schedule: ScheduleKind,
    splitter: SplitterKind,
    h: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Spec(_) | Error::InvalidParameter(_) | Error::Json(_) => 2,
        Error::Load { .. } | Error::Csv(_) | Error::Io(_) => 3,
        Error::BudgetExceeded { .. } => 4,
        _ => 1,
    }
}

fn run(command: Command) -> dptree::Result<()> {
    match command {
        Command::Train {
            config,
            zero_noise,
            seed,
        } => {
            let config = ExperimentConfig::load(&config)?;
            let data = PreparedData::load(&config)?;
            let mut point = config.points()[0];
            if let Some(s) = seed {
                point.seed = s;
            }
            let row = experiment::run_single(&config, &data, &point, zero_noise)?;
            println!("{}", serde_json::to_string_pretty(&row)?);
        }
        Command::Sweep { config, out } => {
            let config = ExperimentConfig::load(&config)?;
            let out = out
                .or_else(|| config.out.clone())
                .ok_or_else(|| Error::Config("no output path: pass --out or set \"out\"".into()))?;
            let out = experiment::resolve_output(&out);
            let threads = experiment::thread_count()?;
            let data = PreparedData::load(&config)?;
            let report = experiment::run_sweep(&config, &data, &out, threads)?;
            eprintln!(
                "{}: {} rows written, {} resumed",
                out.display(),
                report.written,
                report.resumed
            );
        }
        Command::Theory { query, params } => {
            let text = if params.trim_start().starts_with('{') {
                params
            } else {
                std::fs::read_to_string(&params).map_err(|e| Error::Config(format!("{params}: {e}")))?
            };
            println!("{}", serde_json::to_string_pretty(&theory_query(query, &text)?)?);
        }
        Command::Summarize { input, out } => {
            let rows = experiment::read_results(&input)?;
            let cells = experiment::summarize(&rows);
            let text = serde_json::to_string_pretty(&cells)?;
            match out {
                Some(p) => write_text(&experiment::resolve_output(&p), &text)?,
                None => println!("{text}"),
            }
            let bad: usize = cells.iter().map(|c| c.budget_violations).sum();
            if bad > 0 {
                eprintln!("warning: {bad} rows exceed their privacy budget");
            }
        }
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> dptree::Result<()> {
    std::fs::write(path, format!("{text}\n"))?;
    Ok(())
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> dptree::Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("params: {e}")))
}

fn theory_query(query: TheoryQuery, text: &str) -> dptree::Result<Value> {
    let echo: Value = parse(text)?;
    let (name, result) = match query {
        TheoryQuery::Sensitivity => {
            let p: SensitivityParams = parse(text)?;
            ("sensitivity", json!(theory::sensitivity_bound(p.criterion, p.m)?))
        }
        TheoryQuery::RnmBound => {
            let p: BoundParams = parse(text)?;
            (
                "rnm-bound",
                json!({
                    "b": theory::rnm_bound_b(p.zeta, p.alpha, p.delta, p.h)?,
                    "samples": theory::rnm_sample_bound(p.zeta, p.alpha, p.delta, p.h)?,
                }),
            )
        }
        TheoryQuery::NoisycountsBound => {
            let p: BoundParams = parse(text)?;
            (
                "noisycounts-bound",
                json!({
                    "b": theory::noisycounts_bound_b(p.zeta, p.alpha, p.delta, p.k, p.h)?,
                    "samples": theory::noisycounts_sample_bound(p.zeta, p.alpha, p.delta, p.k, p.h)?,
                }),
            )
        }
        TheoryQuery::Recurrence => {
            let p: RecurrenceParams = parse(text)?;
            ("recurrence", json!(theory::boosting_recurrence(p.epsilon, p.gamma, p.slowdown)?))
        }
        TheoryQuery::Requirement => {
            let p: RequirementParams = parse(text)?;
            let w = WeakLearningParams {
                gamma: p.gamma,
                epsilon: p.epsilon,
                delta: p.delta,
                max_splits: p.max_splits,
                alpha: p.alpha,
                k: p.k,
                schedule: p.schedule,
            };
            ("requirement", json!(theory::dataset_requirement(&w, p.splitter, p.h)?))
        }
    };
    Ok(json!({ "query": name, "params": echo, "result": result }))
}
