use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use migbench_core::benchgen::{
    diff_suites, feedback_from, generate, read_suite, render_delta, render_feedback, to_canonical_json, write_suite,
    GenerateConfig, DEFAULT_NOISY_FACTOR, REPRODUCIBLE_TIMESTAMP,
};
use migbench_core::diff::diff_snapshots;
use migbench_core::evaluator::{evaluate, render_report, AgentPatch};
use migbench_core::kb::{lint_kb, load_kb_set};
use migbench_core::{BenchmarkSuite, KbSet, MappingResult};

use crate::config::RunConfig;
use crate::{Cli, Command, EvaluateArgs, FeedbackArgs, GenerateArgs, KbCommand, SuiteCommand, SynthArgs};

const FINDINGS: u8 = 2;

pub fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = RunConfig::load_or_default(cli.config.as_deref())?;
    if let Some(n) = cli.jobs.or(cfg.jobs) {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().context("cannot size the worker pool")?;
    }
    match cli.command {
        Command::Kb { command: KbCommand::Lint { kb_root } } => kb_lint(cfg, kb_root.as_deref()),
        Command::Generate(args) => cmd_generate(cfg, args),
        Command::Evaluate(args) => cmd_evaluate(cfg, args),
        Command::Suite { command: SuiteCommand::Diff { old, new } } => suite_diff(&old, &new),
        Command::Feedback(args) => cmd_feedback(cfg, args),
    }
}

fn with_synth_flags(mut cfg: RunConfig, flags: &SynthArgs) -> RunConfig {
    if let Some(root) = &flags.kb_root {
        cfg.kb_root = Some(root.clone());
    }
    if let Some(b) = flags.backend {
        cfg.synth.backend = b;
    }
    cfg
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn read_suite_file(path: &Path) -> Result<BenchmarkSuite> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    read_suite(&text).with_context(|| format!("{}", path.display()))
}

fn kb_lint(cfg: RunConfig, kb_root: Option<&Path>) -> Result<ExitCode> {
    let root = match kb_root {
        Some(r) => r,
        None => cfg.kb_root()?,
    };
    let kbs = load_kb_set(root)?;
    let mut findings = 0;
    for doc in kbs.docs() {
        for d in lint_kb(doc) {
            println!("{d}");
            findings += 1;
        }
    }
    Ok(if findings == 0 { ExitCode::SUCCESS } else { ExitCode::from(FINDINGS) })
}

fn cmd_generate(cfg: RunConfig, args: GenerateArgs) -> Result<ExitCode> {
    let cfg = with_synth_flags(cfg, &args.synth);
    cfg.check()?;
    if cfg.services.is_empty() {
        bail!("the config declares no [[service]] entries");
    }
    let out_dir = args.out.or(cfg.output.dir.clone()).context("no output directory: pass --out or set output.dir")?;
    let kbs = load_kb_set(cfg.kb_root()?)?;
    let synth = cfg.synthesizer(&kbs)?;
    let gen = GenerateConfig {
        map: cfg.map_options(),
        noisy_factor: cfg.noisy_factor.unwrap_or(DEFAULT_NOISY_FACTOR),
        tool_version: if args.reproducible {
            "migbench".into()
        } else {
            concat!("migbench ", env!("CARGO_PKG_VERSION")).into()
        },
        generated_at: if args.reproducible {
            REPRODUCIBLE_TIMESTAMP.into()
        } else {
            chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
        },
        ..GenerateConfig::default()
    };
    let out = generate(&cfg.services, &kbs, &synth, &gen)?;

    fs::create_dir_all(&out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    write(&out_dir.join("suite.json"), &write_suite(&out.suite))?;
    write(&out_dir.join("feedback.json"), &to_canonical_json(&out.feedback))?;
    write(&out_dir.join("mapping.json"), &to_canonical_json(&out.mappings))?;

    let unmatched: usize = out.feedback.unmatched_hunk_count.values().sum();
    println!("instances: {} across {} services", out.suite.instances.len(), out.suite.manifest.services.len());
    println!("silent KBs: {}", list_or_none(&out.feedback.silent_kbs));
    println!("noisy KBs: {}", list_or_none(&out.feedback.noisy_kbs));
    println!("unmatched hunks: {unmatched}");
    Ok(ExitCode::SUCCESS)
}

fn list_or_none(items: &[String]) -> String {
    if items.is_empty() {
        "none".into()
    } else {
        items.join(", ")
    }
}

fn cmd_evaluate(cfg: RunConfig, args: EvaluateArgs) -> Result<ExitCode> {
    let mut cfg = with_synth_flags(cfg, &args.synth);
    if let Some(t) = args.tau {
        cfg.tau = t;
    }
    cfg.check()?;
    let suite = read_suite_file(&args.suite)?;
    let service = match args.service {
        Some(s) => s,
        None => match suite.manifest.services.as_slice() {
            [only] => only.service_id.clone(),
            _ => bail!("the suite covers several services; pass --service"),
        },
    };
    let patch = match (&args.patch, &args.pre, &args.post) {
        (Some(p), _, _) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            AgentPatch::parse(&service, &text).with_context(|| format!("{}", p.display()))?
        }
        (None, Some(pre), Some(post)) => AgentPatch { service_id: service.clone(), files: diff_snapshots(pre, post, cfg.context)? },
        _ => bail!("pass --patch or both --pre and --post"),
    };
    let kbs = load_kb_set(cfg.kb_root()?)?;
    if kbs.set_hash() != suite.manifest.kb_set_hash {
        log::warn!("KB set differs from the one the suite was generated with");
    }
    let synth = cfg.synthesizer(&kbs)?;
    let report = evaluate(&patch, &suite, &kbs, &synth, cfg.tau, cfg.map_options())?;
    print!("{}", render_report(&report));
    if let Some(out) = &args.out {
        write(out, &to_canonical_json(&report))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn suite_diff(old: &Path, new: &Path) -> Result<ExitCode> {
    let delta = diff_suites(&read_suite_file(old)?, &read_suite_file(new)?);
    if delta.is_empty() {
        println!("no changes");
        return Ok(ExitCode::SUCCESS);
    }
    print!("{}", render_delta(&delta));
    Ok(ExitCode::from(FINDINGS))
}

fn cmd_feedback(cfg: RunConfig, args: FeedbackArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&args.mapping).with_context(|| format!("cannot read {}", args.mapping.display()))?;
    let mappings: Vec<MappingResult> =
        serde_json::from_str(&text).with_context(|| format!("{} is not a mapping file", args.mapping.display()))?;
    let kbs = match args.kb_root.as_deref().or(cfg.kb_root.as_deref()) {
        Some(root) => load_kb_set(root)?,
        None => KbSet::empty(),
    };
    let factor = args.noisy_factor.or(cfg.noisy_factor).unwrap_or(DEFAULT_NOISY_FACTOR);
    let feedback = feedback_from(&kbs, &mappings, factor);
    print!("{}", render_feedback(&feedback));
    if let Some(out) = &args.out {
        write(out, &to_canonical_json(&feedback))?;
    }
    Ok(ExitCode::SUCCESS)
}
