//! Scoring agent patches against a suite.

mod matching;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchgen::BenchmarkSuite;
use crate::diff::{parse_unified_diff, CommitDiff, FileDiff, FileStatus, Hunk, LineEdit, ParseError, DEV_NULL};
use crate::kb::KbSet;
use crate::matcher::{map_hunks, MapError, MapOptions};
use crate::synth::Synthesizer;

pub use matching::{match_edits, normalized_distance, EditMatching, EditPair, DEFAULT_TAU};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("F1 is undefined when precision + recall = 0")]
pub struct DomainError;

/// Harmonic mean of precision and recall.
pub fn f1(precision: f64, recall: f64) -> Result<f64, DomainError> {
    let s = precision + recall;
    if s <= 0.0 {
        return Err(DomainError);
    }
    Ok(2.0 * precision * recall / s)
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

pub fn line_metrics(m: &EditMatching) -> LineMetrics {
    let precision = ratio(m.pairs.len(), m.predicted_count());
    let recall = ratio(m.pairs.len(), m.truth_count());
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) => f1(p, r).ok(),
        _ => None,
    };
    LineMetrics { precision, recall, f1 }
}

/// An agent's unified diff against a service's pre-migration state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentPatch {
    pub service_id: String,
    pub files: Vec<FileDiff>,
}

impl AgentPatch {
    pub fn parse(service_id: &str, text: &str) -> Result<Self, ParseError> {
        Ok(Self { service_id: service_id.to_string(), files: parse_unified_diff(text)? })
    }

    pub fn edits(&self) -> Vec<LineEdit> {
        self.files
            .iter()
            .filter(|f| f.is_text())
            .flat_map(|f| f.hunks.iter().flat_map(Hunk::line_edits))
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("service `{0}` has no instances in the suite")]
    UnknownService(String),
    #[error("tau must lie in [0, 1], got {0}")]
    BadTau(f64),
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbOutcome {
    pub required: bool,
    pub attempted: bool,
    pub validated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingSummary {
    pub pairs: usize,
    pub predicted: usize,
    pub truth: usize,
    pub mean_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub service_id: String,
    pub tau: f64,
    pub line_precision: Option<f64>,
    pub line_recall: Option<f64>,
    pub line_f1: Option<f64>,
    pub kb_precision: Option<f64>,
    pub kb_recall: Option<f64>,
    /// Why each absent metric is absent.
    pub absent: BTreeMap<String, String>,
    /// Required or attempted KBs.
    pub per_kb: BTreeMap<String, KbOutcome>,
    pub matching: MatchingSummary,
    #[serde(skip)]
    pub detail: EditMatching,
}

/// Truth hunks of a service, de-duplicated by hunk id, with the KBs each
/// belongs to.
fn truth_hunks<'s>(suite: &'s BenchmarkSuite, service_id: &str) -> Vec<(&'s Hunk, BTreeSet<&'s str>)> {
    let mut order: Vec<&Hunk> = Vec::new();
    let mut owners: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for inst in suite.instances.iter().filter(|i| i.service_id == service_id) {
        for h in &inst.hunks {
            let set = owners.entry(h.id().as_str()).or_default();
            if set.is_empty() {
                order.push(h);
            }
            set.insert(&inst.kb_id);
        }
    }
    order.into_iter().map(|h| (h, owners[h.id().as_str()].clone())).collect()
}

/// Ground-truth patch for a service: one file section per distinct truth
/// hunk.
pub fn oracle_patch(suite: &BenchmarkSuite, service_id: &str) -> Vec<FileDiff> {
    truth_hunks(suite, service_id)
        .into_iter()
        .map(|(h, _)| {
            let status = if h.file_old() == DEV_NULL {
                FileStatus::Added
            } else if h.file_new() == DEV_NULL {
                FileStatus::Deleted
            } else if h.file_old() != h.file_new() {
                FileStatus::Renamed
            } else {
                FileStatus::Modified
            };
            FileDiff {
                old_path: h.file_old().to_string(),
                new_path: h.file_new().to_string(),
                status,
                binary: false,
                hunks: vec![h.clone()],
            }
        })
        .collect()
}

/// Line-edit and per-KB metrics for one service.
pub fn evaluate(
    patch: &AgentPatch,
    suite: &BenchmarkSuite,
    kbs: &KbSet,
    synth: &Synthesizer,
    tau: f64,
    opts: MapOptions,
) -> Result<EvalReport, EvalError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(EvalError::BadTau(tau));
    }
    let service_id = patch.service_id.as_str();
    let required: BTreeSet<&str> = suite
        .instances
        .iter()
        .filter(|i| i.service_id == service_id)
        .map(|i| i.kb_id.as_str())
        .collect();
    if required.is_empty() {
        return Err(EvalError::UnknownService(service_id.to_string()));
    }

    // Truth edits keyed by content so matched pairs can be traced back to
    // their KBs; identical edits from distinct hunks stay distinct entries.
    let mut truth: Vec<LineEdit> = Vec::new();
    let mut truth_owners: Vec<BTreeSet<&str>> = Vec::new();
    for (h, owners) in truth_hunks(suite, service_id) {
        for e in h.line_edits() {
            truth.push(e);
            truth_owners.push(owners.clone());
        }
    }
    let predicted = patch.edits();
    let matching = match_edits(&predicted, &truth, tau);

    let mut validated: BTreeSet<&str> = BTreeSet::new();
    {
        let mut pool: BTreeMap<&LineEdit, Vec<usize>> = BTreeMap::new();
        for (i, e) in truth.iter().enumerate() {
            pool.entry(e).or_default().push(i);
        }
        let mut taken = HashSet::new();
        for pair in &matching.pairs {
            if let Some(idx) = pool.get(&pair.truth).and_then(|v| v.iter().find(|i| !taken.contains(*i))) {
                taken.insert(*idx);
                validated.extend(truth_owners[*idx].iter().copied());
            }
        }
    }

    let agent_commit = CommitDiff {
        commit_id: "agent".into(),
        parent_id: String::new(),
        message: String::new(),
        files: patch.files.clone(),
    };
    let mapping = map_hunks(service_id, &[agent_commit], kbs, synth, opts)?;
    let attempted: BTreeSet<String> = mapping
        .assignments
        .iter()
        .flat_map(|a| a.kbs.iter().map(|k| k.kb_id.clone()))
        .collect();

    let mut per_kb = BTreeMap::new();
    for id in required.iter().copied().chain(attempted.iter().map(String::as_str)) {
        per_kb.insert(
            id.to_string(),
            KbOutcome {
                required: required.contains(id),
                attempted: attempted.contains(id),
                validated: validated.contains(id),
            },
        );
    }
    let attempted_and_validated = attempted.iter().filter(|k| validated.contains(k.as_str())).count();
    let kb_precision = ratio(attempted_and_validated, attempted.len());
    let kb_recall = ratio(required.iter().filter(|k| validated.contains(*k)).count(), required.len());

    let lm = line_metrics(&matching);
    let mut absent = BTreeMap::new();
    if lm.precision.is_none() {
        absent.insert("line_precision".to_string(), "no predicted edits".to_string());
    }
    if lm.recall.is_none() {
        absent.insert("line_recall".to_string(), "no truth edits".to_string());
    }
    if lm.f1.is_none() {
        let why = if lm.precision.is_some() && lm.recall.is_some() {
            "precision + recall = 0"
        } else {
            "a component is absent"
        };
        absent.insert("line_f1".to_string(), why.to_string());
    }
    if kb_precision.is_none() {
        absent.insert("kb_precision".to_string(), "no KB attempted".to_string());
    }

    let mean_distance = (!matching.pairs.is_empty())
        .then(|| matching.pairs.iter().map(|p| p.distance).sum::<f64>() / matching.pairs.len() as f64);
    Ok(EvalReport {
        service_id: service_id.to_string(),
        tau,
        line_precision: lm.precision,
        line_recall: lm.recall,
        line_f1: lm.f1,
        kb_precision,
        kb_recall,
        absent,
        per_kb,
        matching: MatchingSummary {
            pairs: matching.pairs.len(),
            predicted: matching.predicted_count(),
            truth: matching.truth_count(),
            mean_distance,
        },
        detail: matching,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "–".to_string(), |x| format!("{x:.3}"))
}

fn flag(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Per-KB rows followed by the metric summary.
pub fn render_report(report: &EvalReport) -> String {
    let width = report.per_kb.keys().map(|k| k.chars().count()).max().unwrap_or(2).max(2);
    let mut out = String::new();
    let _ = writeln!(out, "service {}  (tau {})", report.service_id, report.tau);
    let _ = writeln!(out, "{:<width$}  required  attempted  validated", "kb");
    for (id, o) in &report.per_kb {
        let _ = writeln!(
            out,
            "{id:<width$}  {:<8}  {:<9}  {}",
            flag(o.required),
            flag(o.attempted),
            flag(o.validated)
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "line precision  {}", cell(report.line_precision));
    let _ = writeln!(out, "line recall     {}", cell(report.line_recall));
    let _ = writeln!(out, "line F1         {}", cell(report.line_f1));
    let _ = writeln!(out, "kb precision    {}", cell(report.kb_precision));
    let _ = writeln!(out, "kb recall       {}", cell(report.kb_recall));
    let _ = writeln!(
        out,
        "pairs {} of {} predicted, {} truth",
        report.matching.pairs, report.matching.predicted, report.matching.truth
    );
    out
}
