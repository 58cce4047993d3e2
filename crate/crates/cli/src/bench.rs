use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use emulate_core::eval::runner::{run_all, ClaimOutcome};
use emulate_core::eval::{
    load_dataset, render_table, score, subset, write_predictions, DatasetKind, LoadOptions, MetricReport,
    PredictionRecord, DEFAULT_SEED,
};
use serde::Serialize;

use crate::{CliError, RunArgs};

#[derive(Args)]
pub struct BenchArgs {
    /// factool-kbqa, bingcheck or factcheck-bench.
    dataset: DatasetKind,
    /// Dataset file (JSON array or JSON lines).
    path: PathBuf,
    #[command(flatten)]
    run: RunArgs,
    /// Claims verified at the same time.
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    /// Verify only a seeded sample of this many claims.
    #[arg(long)]
    limit: Option<usize>,
    /// Seed for dataset sampling.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Use every labelled claim instead of the standard per-class counts.
    #[arg(long)]
    full: bool,
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
    /// Also write one trace file per claim under OUT/traces.
    #[arg(long)]
    trace: bool,
    /// Exit with status 3 when a larger share of claims fails.
    #[arg(long, default_value_t = 0.1)]
    max_error_rate: f64,
}

#[derive(Serialize)]
struct BenchReport {
    dataset: DatasetKind,
    method: &'static str,
    model: String,
    temperature: f64,
    max_queries: usize,
    max_results: usize,
    seed: u64,
    claims: usize,
    scored: usize,
    errored: usize,
    metrics: Option<MetricReport>,
    row: Option<[String; 8]>,
}

fn trace_file_name(id: &str) -> String {
    let safe: String = id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    format!("{safe}.jsonl")
}

fn write_traces(dir: &Path, outcomes: &[ClaimOutcome]) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    for o in outcomes {
        if let Some(report) = &o.report {
            let path = dir.join(trace_file_name(&o.record.claim_id));
            report.trace.write_jsonl(BufWriter::new(File::create(&path)?))?;
        }
    }
    Ok(())
}

pub fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    if args.concurrency == 0 {
        return crate::usage("--concurrency must be at least 1");
    }
    if !args.path.is_file() {
        return crate::usage(format!("dataset file {} not found", args.path.display()));
    }
    let options = if args.full { LoadOptions::full(args.seed) } else { LoadOptions::standard(args.dataset, args.seed) };
    let mut claims = load_dataset(args.dataset, &args.path, &options).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(n) = args.limit {
        claims = subset(claims, n, args.seed);
    }
    let verifier = args.run.verifier()?;
    let ablations = args.run.ablations();
    let total = claims.len();
    eprintln!("verifying {total} {} claims ({})", args.dataset, ablations.label());

    let outcomes = run_all(&verifier, &claims, args.concurrency, &|i, o| {
        let shown = match (&o.record.predicted, &o.record.error) {
            (Some(v), _) => v.to_string(),
            (None, Some(e)) => format!("error: {e}"),
            (None, None) => "error".into(),
        };
        eprintln!("[{}/{total}] {} {shown}", i + 1, o.record.claim_id);
    });

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let records: Vec<PredictionRecord> = outcomes.iter().map(|o| o.record.clone()).collect();
    write_predictions(&args.out.join("predictions.jsonl"), &records).context("writing predictions")?;
    if args.trace {
        write_traces(&args.out.join("traces"), &outcomes).context("writing traces")?;
    }

    let errored = records.iter().filter(|r| r.is_errored()).count();
    let metrics = score(&records);
    let report = BenchReport {
        dataset: args.dataset,
        method: ablations.label(),
        model: verifier.config().model_id.clone(),
        temperature: verifier.config().temperature,
        max_queries: verifier.config().max_search_queries,
        max_results: verifier.config().max_results_per_query,
        seed: args.seed,
        claims: total,
        scored: total - errored,
        errored,
        metrics,
        row: metrics.map(|m| m.row()),
    };
    let mut json = serde_json::to_string_pretty(&report).context("serializing report")?;
    json.push('\n');
    fs::write(args.out.join("report.json"), json).context("writing report.json")?;

    let mut text = match metrics {
        Some(m) => render_table(&[(args.dataset.to_string(), ablations.label().to_string(), m)]),
        None => "no claim finished; nothing to score\n".to_string(),
    };
    if errored > 0 {
        text.push_str(&format!("{errored} of {total} claims errored and were excluded from the metrics\n"));
    }
    fs::write(args.out.join("report.txt"), &text).context("writing report.txt")?;
    print!("{text}");

    let rate = if total == 0 { 0.0 } else { errored as f64 / total as f64 };
    if metrics.is_none() || rate > args.max_error_rate {
        return Err(CliError::Partial(format!(
            "{errored} of {total} claims failed (allowed share {})",
            args.max_error_rate
        )));
    }
    Ok(())
}
