//! Hunk to KB mapping.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::{CommitDiff, Hunk, HunkId};
use crate::glob::PathGate;
use crate::kb::{KbDoc, KbSet};
use crate::synth::{SynthError, SynthRequest, Synthesizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MatcherKind {
    Keyword,
    Pattern,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchEvidence {
    pub kb_id: String,
    pub matcher_kind: MatcherKind,
    pub matcher_value: String,
    /// Index of the first firing ADD/DEL line within the hunk body.
    pub line_index: usize,
    /// Pattern description a synthesized pattern came from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvidenceMode {
    /// Stop evaluating a KB after its first firing matcher.
    First,
    #[default]
    All,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MapOptions {
    pub evidence: EvidenceMode,
    /// Log and skip descriptions the synthesizer cannot resolve.
    pub skip_synth_failures: bool,
}

#[derive(Debug, Error)]
pub enum MapError {
    #[error("cannot synthesize patterns for `{kb_id}` description `{description}`: {source}")]
    SynthFailure {
        kb_id: String,
        description: String,
        #[source]
        source: SynthError,
    },
    #[error("KB `{kb_id}`: {reason}")]
    BadKb { kb_id: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HunkRef {
    pub hunk_id: HunkId,
    pub commit_id: String,
    pub path: String,
    pub old_start: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbMatch {
    pub kb_id: String,
    pub evidence: Vec<MatchEvidence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub hunk: HunkRef,
    /// Firing KBs in id order.
    pub kbs: Vec<KbMatch>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingResult {
    pub service_id: String,
    /// Sorted by (commit order, path, old_start).
    pub assignments: Vec<Assignment>,
    pub unmatched: Vec<HunkRef>,
    /// Every KB in the set, including those with zero hits.
    pub kb_hit_counts: BTreeMap<String, usize>,
}

impl MappingResult {
    pub fn kbs_for(&self, hunk_id: &HunkId) -> Option<&[KbMatch]> {
        self.assignments
            .iter()
            .find(|a| &a.hunk.hunk_id == hunk_id)
            .map(|a| a.kbs.as_slice())
    }

    /// Hunk ids assigned to `kb_id`, in result order.
    pub fn hunks_for_kb<'a>(&'a self, kb_id: &'a str) -> impl Iterator<Item = &'a HunkRef> + 'a {
        self.assignments
            .iter()
            .filter(move |a| a.kbs.iter().any(|k| k.kb_id == kb_id))
            .map(|a| &a.hunk)
    }

    pub fn total_hunks(&self) -> usize {
        self.assignments.len() + self.unmatched.len()
    }
}

/// True iff some ADD/DEL line contains `keyword` (case-sensitive) and the
/// gate admits the hunk's path.
pub fn keyword_match(hunk: &Hunk, keyword: &str, gate: &PathGate) -> bool {
    gate.allows(hunk.path()) && first_keyword_line(hunk, keyword).is_some()
}

/// True iff the pattern finds a nonempty match in some ADD/DEL line and the
/// gate admits the hunk's path.
pub fn pattern_match(hunk: &Hunk, pattern: &Regex, gate: &PathGate) -> bool {
    gate.allows(hunk.path()) && first_pattern_line(hunk, &CompiledPattern::new(pattern.clone())).is_some()
}

fn first_keyword_line(hunk: &Hunk, keyword: &str) -> Option<usize> {
    hunk.changed_lines().find(|(_, l)| l.content.contains(keyword)).map(|(i, _)| i)
}

struct CompiledPattern {
    re: Regex,
    /// Full-match variant, built only for patterns that accept "".
    whole: Option<Regex>,
}

impl CompiledPattern {
    fn new(re: Regex) -> Self {
        let whole = re
            .is_match("")
            .then(|| Regex::new(&format!("^(?:{})$", re.as_str())).expect("wrapping a valid regex"));
        Self { re, whole }
    }

    fn nonempty_match(&self, line: &str) -> bool {
        let Some(whole) = &self.whole else {
            return self.re.is_match(line);
        };
        if self.re.find_iter(line).any(|m| !m.is_empty()) {
            return true;
        }
        let bounds: Vec<usize> = line.char_indices().map(|(i, _)| i).chain([line.len()]).collect();
        bounds
            .iter()
            .enumerate()
            .any(|(a, &i)| bounds[a + 1..].iter().any(|&j| whole.is_match(&line[i..j])))
    }
}

fn first_pattern_line(hunk: &Hunk, pattern: &CompiledPattern) -> Option<usize> {
    hunk.changed_lines().find(|(_, l)| pattern.nonempty_match(&l.content)).map(|(i, _)| i)
}

struct CompiledKb {
    id: String,
    gate: PathGate,
    keywords: Vec<String>,
    patterns: Vec<(CompiledPattern, Option<String>)>,
}

fn compile_kb(doc: &KbDoc, synth: &Synthesizer, opts: MapOptions) -> Result<CompiledKb, MapError> {
    let bad = |reason: String| MapError::BadKb { kb_id: doc.id.clone(), reason };
    let gate = PathGate::new(&doc.file_globs).map_err(|e| bad(e.to_string()))?;
    let mut seen = HashSet::new();
    let mut patterns = Vec::new();
    for p in &doc.patterns {
        let re = Regex::new(p).map_err(|e| bad(e.to_string()))?;
        if seen.insert(p.clone()) {
            patterns.push((CompiledPattern::new(re), None));
        }
    }
    for description in &doc.pattern_descriptions {
        let result = match synth.synthesize(&SynthRequest::for_kb(doc, description)) {
            Ok(r) => r,
            Err(source) if opts.skip_synth_failures => {
                log::warn!("skipping `{}` description `{description}`: {source}", doc.id);
                continue;
            }
            Err(source) => {
                return Err(MapError::SynthFailure {
                    kb_id: doc.id.clone(),
                    description: description.clone(),
                    source,
                })
            }
        };
        for p in result.patterns {
            if seen.insert(p.clone()) {
                let re = Regex::new(&p).map_err(|e| bad(e.to_string()))?;
                patterns.push((CompiledPattern::new(re), Some(description.clone())));
            }
        }
    }
    Ok(CompiledKb { id: doc.id.clone(), gate, keywords: doc.keywords.clone(), patterns })
}

fn evaluate(hunk: &Hunk, kb: &CompiledKb, mode: EvidenceMode) -> Vec<MatchEvidence> {
    let mut out = Vec::new();
    if !kb.gate.allows(hunk.path()) {
        return out;
    }
    for kw in &kb.keywords {
        if let Some(line_index) = first_keyword_line(hunk, kw) {
            out.push(MatchEvidence {
                kb_id: kb.id.clone(),
                matcher_kind: MatcherKind::Keyword,
                matcher_value: kw.clone(),
                line_index,
                description: None,
            });
            if mode == EvidenceMode::First {
                return out;
            }
        }
    }
    for (p, description) in &kb.patterns {
        if let Some(line_index) = first_pattern_line(hunk, p) {
            out.push(MatchEvidence {
                kb_id: kb.id.clone(),
                matcher_kind: MatcherKind::Pattern,
                matcher_value: p.re.as_str().to_string(),
                line_index,
                description: description.clone(),
            });
            if mode == EvidenceMode::First {
                return out;
            }
        }
    }
    out
}

/// Maps every text hunk of `commits` onto the KBs whose matchers fire.
pub fn map_hunks(
    service_id: &str,
    commits: &[CommitDiff],
    kbs: &KbSet,
    synth: &Synthesizer,
    opts: MapOptions,
) -> Result<MappingResult, MapError> {
    let compiled = kbs
        .docs()
        .par_iter()
        .map(|d| compile_kb(d, synth, opts))
        .collect::<Result<Vec<_>, _>>()?;

    let mut ordered: Vec<(usize, &str, &Hunk)> = commits
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| c.hunks().map(move |h| (ci, c.commit_id.as_str(), h)))
        .collect();
    ordered.sort_by(|a, b| {
        (a.0, a.2.path(), a.2.old_start(), a.2.new_start()).cmp(&(b.0, b.2.path(), b.2.old_start(), b.2.new_start()))
    });
    let mut seen = HashSet::new();
    ordered.retain(|(_, _, h)| seen.insert(h.id().clone()));

    let evaluated: Vec<(HunkRef, Vec<KbMatch>)> = ordered
        .par_iter()
        .map(|(_, commit_id, hunk)| {
            let kbs: Vec<KbMatch> = compiled
                .iter()
                .filter_map(|kb| {
                    let evidence = evaluate(hunk, kb, opts.evidence);
                    (!evidence.is_empty()).then(|| KbMatch { kb_id: kb.id.clone(), evidence })
                })
                .collect();
            let r = HunkRef {
                hunk_id: hunk.id().clone(),
                commit_id: commit_id.to_string(),
                path: hunk.path().to_string(),
                old_start: hunk.old_start(),
            };
            (r, kbs)
        })
        .collect();

    let mut result = MappingResult {
        service_id: service_id.to_string(),
        kb_hit_counts: kbs.ids().map(|id| (id.to_string(), 0)).collect(),
        ..Default::default()
    };
    for (hunk, matched) in evaluated {
        if matched.is_empty() {
            result.unmatched.push(hunk);
        } else {
            for m in &matched {
                *result.kb_hit_counts.entry(m.kb_id.clone()).or_default() += 1;
            }
            result.assignments.push(Assignment { hunk, kbs: matched });
        }
    }
    Ok(result)
}

/// Re-runs the matcher named by `evidence` against `hunk`.
pub fn evidence_holds(hunk: &Hunk, doc: &KbDoc, evidence: &MatchEvidence) -> bool {
    let Ok(gate) = PathGate::new(&doc.file_globs) else {
        return false;
    };
    let Some(line) = hunk.lines().get(evidence.line_index).filter(|l| l.is_change()) else {
        return false;
    };
    match evidence.matcher_kind {
        MatcherKind::Keyword => {
            doc.keywords.contains(&evidence.matcher_value)
                && keyword_match(hunk, &evidence.matcher_value, &gate)
                && line.content.contains(&evidence.matcher_value)
        }
        MatcherKind::Pattern => {
            let declared = doc.patterns.contains(&evidence.matcher_value)
                || evidence
                    .description
                    .as_ref()
                    .is_some_and(|d| doc.pattern_descriptions.contains(d));
            let Ok(re) = Regex::new(&evidence.matcher_value) else {
                return false;
            };
            declared && pattern_match(hunk, &re, &gate) && CompiledPattern::new(re).nonempty_match(&line.content)
        }
    }
}
