//! `emulate` command-line tool: verify one claim or benchmark a dataset.

mod bench;

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use emulate_core::agents::PromptSet;
use emulate_core::http::Mode;
use emulate_core::pipeline::{Ablation, Ablations, PipelineError, Verifier};
use emulate_core::setup::{GatewayConfig, Gateways, SetupError};
use emulate_core::{BudgetConfig, Claim, TerminatedBy, VerdictReport};
use serde::Serialize;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "emulate", version, about = "Verify factual claims with LLM agents and web search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify a single claim and print the verdict.
    Verify(VerifyArgs),
    /// Run every claim of a dataset and write predictions and metrics.
    Bench(bench::BenchArgs),
}

#[derive(Args, Clone)]
pub struct RunArgs {
    /// Chat model used by every agent.
    #[arg(long, default_value = "gpt-4.1-2025-04-14")]
    model: String,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    /// Search queries allowed per claim.
    #[arg(long, default_value_t = 4)]
    max_queries: usize,
    /// Results requested per query.
    #[arg(long, default_value_t = 2)]
    max_results: usize,
    #[arg(long, env = "EMULATE_MODE", default_value = "live")]
    mode: Mode,
    /// Fixture directory for record and replay modes.
    #[arg(long, env = "EMULATE_FIXTURES")]
    fixtures: Option<PathBuf>,
    /// Disable an agent: rm-sr or rm-scc. Repeatable.
    #[arg(long = "ablate", value_name = "ABLATION")]
    ablate: Vec<Ablation>,
    /// Directory of prompt files overriding the bundled ones.
    #[arg(long)]
    prompts: Option<PathBuf>,
}

impl RunArgs {
    fn budget(&self) -> BudgetConfig {
        BudgetConfig {
            max_search_queries: self.max_queries,
            max_results_per_query: self.max_results,
            model_id: self.model.clone(),
            temperature: self.temperature,
        }
    }

    pub fn ablations(&self) -> Ablations {
        Ablations::from_list(&self.ablate)
    }

    pub fn verifier(&self) -> Result<Verifier, CliError> {
        let budget = self.budget();
        budget.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let prompts = match &self.prompts {
            Some(dir) => PromptSet::with_overrides(dir).map_err(|e| CliError::Config(e.to_string()))?,
            None => PromptSet::bundled(),
        };
        let gateways = Gateways::build(&GatewayConfig::from_env(self.mode, self.fixtures.clone()))?;
        let verifier = Verifier::new(gateways.llm, gateways.search, gateways.pages, Arc::new(prompts), budget)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(verifier.with_ablations(self.ablations()))
    }
}

#[derive(Args)]
struct VerifyArgs {
    /// The claim to check.
    claim: String,
    #[command(flatten)]
    run: RunArgs,
    /// Write the run trace as JSON lines to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Print the report as JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Partial(String),
    Other(anyhow::Error),
}

impl From<SetupError> for CliError {
    fn from(err: SetupError) -> Self {
        CliError::Config(err.to_string())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(err: anyhow::Error) -> Self {
        CliError::Other(err)
    }
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    claim: &'a str,
    verdict: emulate_core::Verdict,
    terminated_by: TerminatedBy,
    evidence: Vec<EvidenceOut<'a>>,
}

#[derive(Serialize)]
struct EvidenceOut<'a> {
    note: &'a str,
    url: &'a str,
}

fn termination_text(t: TerminatedBy) -> &'static str {
    match t {
        TerminatedBy::SufficientEvidence => "sufficient evidence",
        TerminatedBy::BudgetExhausted => "search budget exhausted",
    }
}

fn print_report(claim: &Claim, report: &VerdictReport, json: bool) -> anyhow::Result<()> {
    let evidence: Vec<EvidenceOut> = report
        .evidence
        .items()
        .iter()
        .map(|i| EvidenceOut { note: &i.note, url: &i.source_url })
        .collect();
    if json {
        let out = VerifyOutput { claim: &claim.text, verdict: report.verdict, terminated_by: report.terminated_by, evidence };
        println!("{}", serde_json::to_string_pretty(&out)?);
        return Ok(());
    }
    println!("{}", report.verdict);
    println!("terminated by: {}", termination_text(report.terminated_by));
    if evidence.is_empty() {
        println!("evidence: none");
    } else {
        println!("evidence:");
        for (i, e) in evidence.iter().enumerate() {
            println!("  {}. {} <{}>", i + 1, e.note, e.url);
        }
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    if args.claim.trim().is_empty() {
        return Err(CliError::Usage("the claim must not be empty".into()));
    }
    let claim = Claim::new("cli", args.claim.trim()).map_err(|e| CliError::Usage(e.to_string()))?;
    let verifier = args.run.verifier()?;
    let report = match verifier.verify(&claim) {
        Ok(report) => report,
        Err(PipelineError::GatewayFatal(msg)) => return Err(CliError::Config(format!("gateway failure: {msg}"))),
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    if let Some(path) = &args.trace {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        report.trace.write_jsonl(BufWriter::new(file)).context("writing trace")?;
    }
    print_report(&claim, &report, args.json)?;
    Ok(())
}

fn run() -> Result<(), CliError> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            e.print().ok();
            return Ok(());
        }
        Err(e) => {
            e.print().ok();
            return Err(CliError::Usage(String::new()));
        }
    };
    match cli.command {
        Command::Verify(args) => cmd_verify(args),
        Command::Bench(args) => bench::cmd_bench(args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, msg) = match err {
                CliError::Usage(m) => (EXIT_USAGE, m),
                CliError::Config(m) => (EXIT_CONFIG, m),
                CliError::Partial(m) => (EXIT_PARTIAL, m),
                CliError::Other(e) => (EXIT_USAGE, format!("{e:#}")),
            };
            if !msg.is_empty() {
                eprintln!("error: {msg}");
            }
            ExitCode::from(code)
        }
    }
}

/// Shared by the subcommands for errors that are plain bugs in the input.
pub fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

