//! Scenario runner: validates and executes experiment scenarios, writing
//! deterministic reports.
//!
//! Exit codes: 0 all experiments pass, 1 any experiment failed, 2 config
//! or output error.

mod experiments;
mod report;
mod scenario;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use report::{emit, parse_formats, Report, Timings};
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "flowpresheaf", version, about = "Flow and seminorm experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write reports.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for independent experiments.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Comma-separated output formats (json, csv).
        #[arg(long, default_value = "json,csv")]
        format: String,
    },
    /// Validate a scenario without running it.
    Validate { scenario: PathBuf },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            scenario,
            out,
            workers,
            format,
        } => run(scenario, out, workers, &format),
        Command::Validate { scenario } => validate(scenario),
    };
    std::process::exit(code);
}

fn load(path: &PathBuf) -> Result<scenario::Compiled, String> {
    let source =
        std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let parsed = scenario::parse(&source).map_err(|e| e.to_string())?;
    scenario::compile(parsed).map_err(|e| e.to_string())
}

fn effective_seed(compiled: &scenario::Compiled) -> Result<u64, String> {
    match std::env::var("FLOWPRESHEAF_SEED") {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .map_err(|e| format!("config error at env FLOWPRESHEAF_SEED: {e}")),
        Err(_) => Ok(compiled.scenario.seed),
    }
}

fn validate(path: PathBuf) -> i32 {
    match load(&path) {
        Ok(compiled) => {
            println!(
                "ok: {} experiments, {} fields, dim {}",
                compiled.scenario.experiments.len(),
                compiled.fields.len(),
                compiled.patch.dim()
            );
            0
        }
        Err(e) => {
            eprintln!("{e}");
            2
        }
    }
}

fn run(path: PathBuf, out: PathBuf, workers: usize, format: &str) -> i32 {
    let formats = match parse_formats(format) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("{e}");
            return 2;
        }
    };
    let compiled = match load(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return 2;
        }
    };
    let seed = match effective_seed(&compiled) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return 2;
        }
    };

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cannot build worker pool: {e}");
            return 2;
        }
    };

    let total_start = Instant::now();
    let indices: Vec<usize> = (0..compiled.scenario.experiments.len()).collect();
    // results are keyed by index, so output order is canonical regardless of
    // completion order
    let mut results: Vec<(usize, report::ExperimentResult, f64)> = pool.install(|| {
        indices
            .par_iter()
            .map(|&i| {
                let start = Instant::now();
                let r = experiments::run_experiment(&compiled, i, seed);
                (i, r, start.elapsed().as_secs_f64())
            })
            .collect()
    });
    results.sort_by_key(|(i, _, _)| *i);

    let mut wall = Vec::new();
    let mut experiment_results = Vec::new();
    for (i, r, secs) in results {
        println!(
            "experiment {i} [{}]: {} - {}",
            r.kind,
            if r.pass { "pass" } else { "FAIL" },
            r.detail
        );
        wall.push((i, secs));
        experiment_results.push(r);
    }
    let all_pass = experiment_results.iter().all(|r| r.pass);
    let report = Report {
        schema: scenario::SCHEMA_VERSION.to_string(),
        seed,
        scenario: serde_json::to_value(&compiled.scenario).expect("scenario serializes"),
        experiments: experiment_results,
        all_pass,
    };
    let timings = Timings {
        wall_seconds: wall,
        total_seconds: total_start.elapsed().as_secs_f64(),
    };
    if let Err(e) = emit(&report, &timings, &out, formats) {
        eprintln!("{e}");
        return 2;
    }
    if all_pass {
        0
    } else {
        1
    }
}
