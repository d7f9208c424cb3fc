//! Operator surface: task generation, run orchestration, analysis, tool
//! listings, config linting, and the optional fixture-backed environment
//! server.
//!
//! Exit codes: 0 success, 1 validation error, 2 partial pair failures,
//! 3 fatal error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use ragbench_core::analysis::report::ReportFormat;
use ragbench_core::env::{remote, tool_specs};
use ragbench_core::gateway::{ChatTurn, Gateway, GenerationParams};
use ragbench_core::knowledge::{load_knowledge_base, Domain};
use ragbench_core::runner::{cmd_analyze, cmd_gen, cmd_run, RunConfig, RunnerError, SystemSelector};

#[derive(Parser)]
#[command(name = "ragbench", version, about = "Evaluation harness for retrieval-augmented LLM systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Command-line overrides for the corresponding run-config fields.
#[derive(Args)]
struct ConfigOverrides {
    /// Override the generation/sampling seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the F1 match threshold.
    #[arg(long)]
    match_threshold: Option<f64>,
    /// Override the environment fuzzy-search floor.
    #[arg(long)]
    fuzzy_threshold: Option<f64>,
    /// Override worker parallelism.
    #[arg(long)]
    parallelism: Option<usize>,
    /// Record per-case wall time (forces parallelism 1).
    #[arg(long)]
    timing_mode: bool,
    /// Override the output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the response-cache directory.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Override the prompt-template directory.
    #[arg(long)]
    prompt_dir: Option<PathBuf>,
    /// Override the systems to run: comma-separated ids or "all-feasible".
    #[arg(long, value_delimiter = ',')]
    systems: Vec<String>,
    /// Inject a tool fault at these call ordinals in every case.
    #[arg(long, value_delimiter = ',')]
    fault_at: Vec<usize>,
}

impl ConfigOverrides {
    fn apply(&self, config: &mut RunConfig) {
        if let Some(seed) = self.seed {
            config.run.seed = seed;
        }
        if let Some(threshold) = self.match_threshold {
            config.run.match_threshold = threshold;
        }
        if let Some(threshold) = self.fuzzy_threshold {
            config.run.fuzzy_threshold = threshold;
        }
        if let Some(parallelism) = self.parallelism {
            config.run.parallelism = parallelism;
        }
        if self.timing_mode {
            config.run.timing_mode = true;
            config.run.parallelism = 1;
        }
        if let Some(dir) = &self.output_dir {
            config.run.output_dir = dir.clone();
        }
        if let Some(dir) = &self.cache_dir {
            config.run.cache_dir = Some(dir.clone());
        }
        if let Some(dir) = &self.prompt_dir {
            config.run.prompt_dir = Some(dir.clone());
        }
        if !self.systems.is_empty() {
            config.run.systems = if self.systems == ["all-feasible"] {
                SystemSelector::Keyword("all-feasible".to_string())
            } else {
                SystemSelector::List(self.systems.clone())
            };
        }
        if !self.fault_at.is_empty() {
            config.run.fault_ordinals = self.fault_at.clone();
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build task pools and test sets from the configured templates and
    /// datasets.
    Gen {
        /// Run configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: ConfigOverrides,
        /// Ask a configured model to draft N extra question templates and
        /// print them. Model output is not deterministic and never feeds
        /// the benchmark automatically.
        #[arg(long, value_name = "N")]
        draft_templates: Option<usize>,
        /// Model id to draft templates with (required with
        /// --draft-templates).
        #[arg(long)]
        draft_model: Option<String>,
    },
    /// Execute every configured (system, case) pair, persisting traces and
    /// results. Interrupted runs resume where they stopped.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Aggregate one or more runs into leaderboard, error and deployment
    /// reports.
    Analyze {
        /// Run directory (repeatable for cross-run comparison).
        #[arg(long = "run", required = true)]
        runs: Vec<PathBuf>,
        /// Output directory (defaults to <first run>/reports).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Formats: csv, json, svg (defaults to all three).
        #[arg(long, value_delimiter = ',')]
        format: Vec<String>,
    },
    /// Print the tool surface of one or both domains.
    Tools {
        #[arg(long)]
        domain: Option<String>,
    },
    /// Lint a run configuration without executing anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Serve a fixture-backed environment session over HTTP
    /// (POST /invoke with body {tool, arguments}).
    Serve {
        #[arg(long)]
        fixture: PathBuf,
        #[arg(long)]
        domain: String,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation = e
                .downcast_ref::<RunnerError>()
                .map(|r| matches!(r, RunnerError::Validation(_)))
                .unwrap_or(false);
            if validation {
                ExitCode::from(1)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Gen {
            config,
            overrides,
            draft_templates,
            draft_model,
        } => {
            let mut config = RunConfig::load(&config)?;
            overrides.apply(&mut config);
            let manifest = cmd_gen(&config)?;
            for task in &manifest.tasks {
                println!(
                    "task {}: pool {}, test set {}{}",
                    task.spec.task_id,
                    task.spec.pool_size,
                    task.spec.test_set_size,
                    if task.warnings.is_empty() {
                        String::new()
                    } else {
                        format!(" ({})", task.warnings.join("; "))
                    }
                );
            }
            println!(
                "manifest written to {}",
                config.run.output_dir.join("tasks/manifest.json").display()
            );
            if let Some(count) = draft_templates {
                draft(&config, count, draft_model.as_deref())?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { config, overrides } => {
            let mut config = RunConfig::load(&config)?;
            overrides.apply(&mut config);
            let summary = cmd_run(&config)?;
            println!(
                "run {}: {} pairs ({} skipped as already complete, {} failed), {} network ops",
                summary.record.run_id,
                summary.record.pairs_total,
                summary.pairs_skipped,
                summary.record.pairs_failed,
                summary.transport_ops,
            );
            println!("results in {}", summary.output_dir.display());
            if summary.record.pairs_failed > 0 {
                Ok(ExitCode::from(2))
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
        Command::Analyze { runs, out, format } => {
            let out_dir = out.unwrap_or_else(|| runs[0].join("reports"));
            let formats = parse_formats(&format)?;
            let outcome = cmd_analyze(&runs, &out_dir, &formats)?;
            if outcome.results == 0 {
                println!("no results to analyze; wrote empty report");
            } else {
                println!("analyzed {} results", outcome.results);
            }
            for warning in &outcome.warnings {
                eprintln!("warning: {warning}");
            }
            for file in &outcome.files {
                println!("wrote {}", file.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Tools { domain } => {
            let domains = match domain {
                Some(name) => vec![name.parse::<Domain>().map_err(anyhow::Error::msg)?],
                None => vec![Domain::Wiki, Domain::Aminer],
            };
            for domain in domains {
                println!("{domain} tools:");
                for spec in tool_specs(domain) {
                    println!("  {}", spec.prompt_line());
                    println!("    returns: {}", spec.returns);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config, overrides } => {
            let mut config = RunConfig::load(&config)?;
            overrides.apply(&mut config);
            config.validate()?;
            let systems = config.resolve_systems()?;
            println!("configuration valid: {} tasks, {} systems", config.tasks.len(), systems.len());
            for system in systems {
                println!("  {}", system.id());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve {
            fixture,
            domain,
            bind,
        } => {
            let domain: Domain = domain.parse().map_err(anyhow::Error::msg)?;
            let kb = Arc::new(load_knowledge_base(&fixture, domain)?);
            let server = remote::serve(kb, &bind, None)?;
            println!("serving {domain} environment on {}", server.base_url());
            println!("POST {}/invoke with body {{\"tool\": ..., \"arguments\": {{...}}}}", server.base_url());
            // park the main thread; the server owns its accept loop
            loop {
                std::thread::park();
            }
        }
    }
}

fn parse_formats(names: &[String]) -> anyhow::Result<Vec<ReportFormat>> {
    if names.is_empty() {
        return Ok(vec![ReportFormat::Csv, ReportFormat::JsonReport, ReportFormat::Svg]);
    }
    names
        .iter()
        .map(|name| match name.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::JsonReport),
            "svg" => Ok(ReportFormat::Svg),
            other => anyhow::bail!("unknown format '{other}' (expected csv, json or svg)"),
        })
        .collect()
}

/// Ask a configured model for template drafts. Marked non-deterministic:
/// the output is printed for a human to review, never written into the
/// benchmark.
fn draft(config: &RunConfig, count: usize, model_id: Option<&str>) -> anyhow::Result<()> {
    let model_id =
        model_id.ok_or_else(|| anyhow::anyhow!("--draft-model is required with --draft-templates"))?;
    let systems = config.resolve_systems()?;
    let model = systems
        .iter()
        .map(|s| &s.model)
        .find(|m| m.id == model_id)
        .cloned()
        .ok_or_else(|| anyhow::anyhow!("model {model_id} is not configured"))?;
    let gateway = Gateway::new();
    let prompt = format!(
        "Draft {count} question templates as JSON lines with fields \
         id, kind, text, bindings, answer_rule, requires. Placeholders in \
         text use {{name}} syntax and every placeholder needs a binding to \
         an attribute path. Reply with JSON lines only."
    );
    let reply = gateway.complete(
        &model,
        &[ChatTurn::user(prompt)],
        &GenerationParams::default(),
        None,
    )?;
    println!("--- drafted templates (review before use; output is not deterministic) ---");
    println!("{}", reply.content);
    Ok(())
}
