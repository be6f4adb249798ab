//! Benchmark suite assembly, serialization, evolution and KB feedback.

mod serial;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::{load_service_commits, snapshot_manifest, Hunk, HunkId, LoadError, ServiceRecord, VcsTool};
use crate::digest::FieldHasher;
use crate::kb::KbSet;
use crate::matcher::{map_hunks, EvidenceMode, MapError, MapOptions, MappingResult, MatchEvidence};
use crate::synth::Synthesizer;

pub use serial::{read_suite, to_canonical_json, write_suite, SuiteReadError, FORMAT_VERSION};

pub const REPRODUCIBLE_TIMESTAMP: &str = "1970-01-01T00:00:00Z";
pub const DEFAULT_NOISY_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub commit_id: String,
    pub hunk_id: HunkId,
    pub evidence: Vec<MatchEvidence>,
    /// Other KBs the same hunk was assigned to.
    pub also_in: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkInstance {
    pub service_id: String,
    pub pre_migration_ref: String,
    pub kb_id: String,
    pub kb_version: String,
    pub hunks: Vec<Hunk>,
    /// One entry per hunk, same order.
    pub provenance: Vec<ProvenanceEntry>,
}

impl BenchmarkInstance {
    pub fn key(&self) -> InstanceKey {
        InstanceKey { service_id: self.service_id.clone(), kb_id: self.kb_id.clone() }
    }

    pub fn hunk_ids(&self) -> BTreeSet<&HunkId> {
        self.hunks.iter().map(Hunk::id).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceEntry {
    pub service_id: String,
    pub pre_migration_ref: String,
    pub migration_commits: Vec<String>,
    /// Path to content digest at the pre-migration ref, when available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub tool_version: String,
    pub kb_set_hash: String,
    pub services: Vec<ServiceEntry>,
    pub generated_at: String,
    pub config_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkSuite {
    pub manifest: Manifest,
    /// Sorted by (service_id, kb_id), unique keys.
    pub instances: Vec<BenchmarkInstance>,
}

impl BenchmarkSuite {
    pub fn get(&self, service_id: &str, kb_id: &str) -> Option<&BenchmarkInstance> {
        self.instances
            .binary_search_by(|i| (i.service_id.as_str(), i.kb_id.as_str()).cmp(&(service_id, kb_id)))
            .ok()
            .map(|idx| &self.instances[idx])
    }

    pub fn keys(&self) -> Vec<InstanceKey> {
        self.instances.iter().map(BenchmarkInstance::key).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbFeedback {
    pub silent_kbs: Vec<String>,
    pub unmatched_hunk_count: BTreeMap<String, usize>,
    pub noisy_kbs: Vec<String>,
    pub noisy_factor: f64,
    pub kb_hit_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InstanceKey {
    pub service_id: String,
    pub kb_id: String,
}

impl std::fmt::Display for InstanceKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.service_id, self.kb_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangedInstance {
    pub key: InstanceKey,
    pub hunks_added: Vec<HunkId>,
    pub hunks_removed: Vec<HunkId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteDelta {
    pub added: Vec<InstanceKey>,
    pub removed: Vec<InstanceKey>,
    pub changed: Vec<ChangedInstance>,
}

impl SuiteDelta {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.changed.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct GenerateConfig {
    pub map: MapOptions,
    pub noisy_factor: f64,
    pub vcs: VcsTool,
    pub tool_version: String,
    pub generated_at: String,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            map: MapOptions::default(),
            noisy_factor: DEFAULT_NOISY_FACTOR,
            vcs: VcsTool::default(),
            tool_version: concat!("migbench ", env!("CARGO_PKG_VERSION")).to_string(),
            generated_at: REPRODUCIBLE_TIMESTAMP.to_string(),
        }
    }
}

impl GenerateConfig {
    /// Digest of every setting that can change suite content.
    pub fn digest(&self, synth: &Synthesizer) -> String {
        let mut h = FieldHasher::new();
        h.field(match self.map.evidence {
            EvidenceMode::First => "first",
            EvidenceMode::All => "all",
        });
        h.field([self.map.skip_synth_failures as u8]);
        h.field(self.noisy_factor.to_le_bytes());
        h.field(synth.kind().as_str());
        h.field(&self.vcs.program);
        for a in self.vcs.diff_args.iter().chain(&self.vcs.snapshot_args) {
            h.field(a);
        }
        h.finish_short(16)
    }
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("no services given")]
    NoServices,
    #[error("service `{0}` listed twice")]
    DuplicateService(String),
    #[error("service `{service_id}`: {source}")]
    Load {
        service_id: String,
        #[source]
        source: LoadError,
    },
    #[error("service `{service_id}`: {source}")]
    Map {
        service_id: String,
        #[source]
        source: Box<MapError>,
    },
}

#[derive(Debug, Clone)]
pub struct GenerateOutput {
    pub suite: BenchmarkSuite,
    pub feedback: KbFeedback,
    /// Per-service mapping, in service id order.
    pub mappings: Vec<MappingResult>,
}

struct ServiceRun {
    entry: ServiceEntry,
    mapping: MappingResult,
    hunks: HashMap<HunkId, Hunk>,
}

fn run_service(
    record: &ServiceRecord,
    kbs: &KbSet,
    synth: &Synthesizer,
    config: &GenerateConfig,
) -> Result<ServiceRun, GenerateError> {
    let load = |source| GenerateError::Load { service_id: record.service_id.clone(), source };
    record.validate().map_err(load)?;
    let commits = load_service_commits(record, &config.vcs).map_err(load)?;
    let snapshot = snapshot_manifest(record, &config.vcs).map_err(load)?;
    let mapping = map_hunks(&record.service_id, &commits, kbs, synth, config.map).map_err(|source| {
        GenerateError::Map { service_id: record.service_id.clone(), source: Box::new(source) }
    })?;
    let hunks = commits
        .iter()
        .flat_map(|c| c.hunks())
        .map(|h| (h.id().clone(), h.clone()))
        .collect();
    Ok(ServiceRun {
        entry: ServiceEntry {
            service_id: record.service_id.clone(),
            pre_migration_ref: record.pre_ref.clone(),
            migration_commits: record.migration_commits.clone(),
            snapshot,
        },
        mapping,
        hunks,
    })
}

/// Builds the suite and feedback for `services` against `kbs`.
pub fn generate(
    services: &[ServiceRecord],
    kbs: &KbSet,
    synth: &Synthesizer,
    config: &GenerateConfig,
) -> Result<GenerateOutput, GenerateError> {
    if services.is_empty() {
        return Err(GenerateError::NoServices);
    }
    let mut sorted: Vec<&ServiceRecord> = services.iter().collect();
    sorted.sort_by(|a, b| a.service_id.cmp(&b.service_id));
    if let Some(w) = sorted.windows(2).find(|w| w[0].service_id == w[1].service_id) {
        return Err(GenerateError::DuplicateService(w[0].service_id.clone()));
    }
    let runs = sorted
        .par_iter()
        .map(|r| run_service(r, kbs, synth, config))
        .collect::<Result<Vec<_>, _>>()?;

    let mut instances: BTreeMap<(String, String), BenchmarkInstance> = BTreeMap::new();
    for run in &runs {
        for a in &run.mapping.assignments {
            let hunk = &run.hunks[&a.hunk.hunk_id];
            for m in &a.kbs {
                let kb = kbs.get(&m.kb_id).expect("mapping only names KBs from the set");
                let inst = instances
                    .entry((run.entry.service_id.clone(), m.kb_id.clone()))
                    .or_insert_with(|| BenchmarkInstance {
                        service_id: run.entry.service_id.clone(),
                        pre_migration_ref: run.entry.pre_migration_ref.clone(),
                        kb_id: m.kb_id.clone(),
                        kb_version: kb.version.clone(),
                        hunks: Vec::new(),
                        provenance: Vec::new(),
                    });
                inst.hunks.push(hunk.clone());
                inst.provenance.push(ProvenanceEntry {
                    commit_id: a.hunk.commit_id.clone(),
                    hunk_id: a.hunk.hunk_id.clone(),
                    evidence: m.evidence.clone(),
                    also_in: a.kbs.iter().filter(|o| o.kb_id != m.kb_id).map(|o| o.kb_id.clone()).collect(),
                });
            }
        }
    }

    let mappings: Vec<MappingResult> = runs.iter().map(|r| r.mapping.clone()).collect();
    let feedback = feedback_from(kbs, &mappings, config.noisy_factor);
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        tool_version: config.tool_version.clone(),
        kb_set_hash: kbs.set_hash().to_string(),
        services: runs.into_iter().map(|r| r.entry).collect(),
        generated_at: config.generated_at.clone(),
        config_digest: config.digest(synth),
    };
    Ok(GenerateOutput {
        suite: BenchmarkSuite { manifest, instances: instances.into_values().collect() },
        feedback,
        mappings,
    })
}

fn median(sorted: &[usize]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    }
}

/// Silent/noisy statistics over all services' mappings.
pub fn feedback_from(kbs: &KbSet, mappings: &[MappingResult], noisy_factor: f64) -> KbFeedback {
    let mut hits: BTreeMap<String, usize> = kbs.ids().map(|id| (id.to_string(), 0)).collect();
    let mut unmatched = BTreeMap::new();
    for m in mappings {
        for (id, n) in &m.kb_hit_counts {
            *hits.entry(id.clone()).or_default() += n;
        }
        *unmatched.entry(m.service_id.clone()).or_default() += m.unmatched.len();
    }
    let silent_kbs = hits.iter().filter(|(_, &n)| n == 0).map(|(k, _)| k.clone()).collect();
    let mut nonzero: Vec<usize> = hits.values().copied().filter(|&n| n > 0).collect();
    nonzero.sort_unstable();
    let noisy_kbs = if nonzero.is_empty() {
        Vec::new()
    } else {
        let threshold = noisy_factor * median(&nonzero);
        hits.iter().filter(|(_, &n)| n as f64 > threshold).map(|(k, _)| k.clone()).collect()
    };
    KbFeedback { silent_kbs, unmatched_hunk_count: unmatched, noisy_kbs, noisy_factor, kb_hit_counts: hits }
}

/// Human-readable feedback table.
pub fn render_feedback(feedback: &KbFeedback) -> String {
    let width = feedback.kb_hit_counts.keys().map(String::len).max().unwrap_or(2).max(2);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>5}  status", "kb", "hits");
    for (id, n) in &feedback.kb_hit_counts {
        let status = if feedback.silent_kbs.contains(id) {
            "silent"
        } else if feedback.noisy_kbs.contains(id) {
            "noisy"
        } else {
            "ok"
        };
        let _ = writeln!(out, "{id:<width$}  {n:>5}  {status}");
    }
    let _ = writeln!(out);
    for (svc, n) in &feedback.unmatched_hunk_count {
        let _ = writeln!(out, "unmatched hunks in {svc}: {n}");
    }
    out
}

/// Set difference on instance keys; changed keys compare hunk id sets.
pub fn diff_suites(old: &BenchmarkSuite, new: &BenchmarkSuite) -> SuiteDelta {
    let index = |s: &BenchmarkSuite| -> BTreeMap<InstanceKey, BTreeSet<HunkId>> {
        s.instances
            .iter()
            .map(|i| (i.key(), i.hunks.iter().map(|h| h.id().clone()).collect()))
            .collect()
    };
    let (a, b) = (index(old), index(new));
    let mut delta = SuiteDelta::default();
    for (key, old_ids) in &a {
        match b.get(key) {
            None => delta.removed.push(key.clone()),
            Some(new_ids) if new_ids != old_ids => delta.changed.push(ChangedInstance {
                key: key.clone(),
                hunks_added: new_ids.difference(old_ids).cloned().collect(),
                hunks_removed: old_ids.difference(new_ids).cloned().collect(),
            }),
            Some(_) => {}
        }
    }
    delta.added = b.keys().filter(|k| !a.contains_key(*k)).cloned().collect();
    delta
}

/// One line per entry: `+ key`, `- key`, `~ key (+a -r)`.
pub fn render_delta(delta: &SuiteDelta) -> String {
    let mut out = String::new();
    for k in &delta.added {
        let _ = writeln!(out, "+ {k}");
    }
    for k in &delta.removed {
        let _ = writeln!(out, "- {k}");
    }
    for c in &delta.changed {
        let _ = writeln!(out, "~ {} (+{} -{} hunks)", c.key, c.hunks_added.len(), c.hunks_removed.len());
    }
    out
}
