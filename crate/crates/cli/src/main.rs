mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Backend;

/// Benchmark generation and patch evaluation for code-migration agents.
#[derive(Parser)]
#[command(name = "migbench", version)]
struct Cli {
    /// Run configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Knowledge-base maintenance.
    Kb {
        #[command(subcommand)]
        command: KbCommand,
    },
    /// Map migration commits to KBs and write the suite.
    Generate(GenerateArgs),
    /// Score an agent patch against a suite.
    Evaluate(EvaluateArgs),
    /// Suite maintenance.
    Suite {
        #[command(subcommand)]
        command: SuiteCommand,
    },
    /// Re-emit KB feedback from a mapping file.
    Feedback(FeedbackArgs),
}

#[derive(Subcommand)]
enum KbCommand {
    /// Parse and lint every KB document.
    Lint {
        #[arg(long)]
        kb_root: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SuiteCommand {
    /// Instances added, removed and changed between two suites.
    Diff { old: PathBuf, new: PathBuf },
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    kb_root: Option<PathBuf>,
    #[arg(long, value_enum)]
    backend: Option<Backend>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    synth: SynthArgs,
    /// Output directory.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
    /// Pin the timestamp and tool version in the manifest.
    #[arg(long)]
    reproducible: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    synth: SynthArgs,
    #[arg(long)]
    suite: PathBuf,
    /// Service the patch belongs to; optional when the suite has one.
    #[arg(long)]
    service: Option<String>,
    /// Unified diff produced by the agent.
    #[arg(long, conflicts_with_all = ["pre", "post"], required_unless_present = "pre")]
    patch: Option<PathBuf>,
    /// Pre-migration tree; diffed against --post.
    #[arg(long, requires = "post")]
    pre: Option<PathBuf>,
    #[arg(long, requires = "pre")]
    post: Option<PathBuf>,
    #[arg(long)]
    tau: Option<f64>,
    /// Write the report as JSON.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FeedbackArgs {
    /// mapping.json written by `generate`.
    #[arg(long)]
    mapping: PathBuf,
    #[arg(long)]
    kb_root: Option<PathBuf>,
    #[arg(long)]
    noisy_factor: Option<f64>,
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
