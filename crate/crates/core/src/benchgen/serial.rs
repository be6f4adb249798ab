//! Canonical JSON form of a suite.
//!
//! Keys are sorted, output is pretty-printed with a trailing LF, and hunks
//! are stored as a header plus a line list (`"+x"`, `"-x"`, `" x"`, and the
//! `"\ No newline at end of file"` marker).

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{BenchmarkInstance, BenchmarkSuite, Manifest, ProvenanceEntry};
use crate::diff::{Hunk, HunkId, HunkLine, LineKind};

pub const FORMAT_VERSION: u32 = 1;
const NO_NEWLINE: &str = "\\ No newline at end of file";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SuiteReadError {
    #[error("schema violation at `{path}`: {reason}")]
    SchemaViolation { path: String, reason: String },
    #[error("unsupported suite format version {found} (supported: {supported})")]
    VersionMismatch { found: String, supported: u32 },
}

fn violation(path: impl Into<String>, reason: impl Into<String>) -> SuiteReadError {
    SuiteReadError::SchemaViolation { path: path.into(), reason: reason.into() }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HunkWire {
    hunk_id: HunkId,
    file_old: String,
    file_new: String,
    old_start: u32,
    old_len: u32,
    new_start: u32,
    new_len: u32,
    lines: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceWire {
    service_id: String,
    pre_migration_ref: String,
    kb_id: String,
    kb_version: String,
    hunks: Vec<HunkWire>,
    provenance: Vec<ProvenanceEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteWire {
    manifest: Manifest,
    instances: Vec<InstanceWire>,
}

fn hunk_to_wire(h: &Hunk) -> HunkWire {
    let mut lines = Vec::with_capacity(h.lines().len());
    for l in h.lines() {
        lines.push(format!("{}{}", l.kind.prefix(), l.content));
        if l.no_newline {
            lines.push(NO_NEWLINE.to_string());
        }
    }
    HunkWire {
        hunk_id: h.id().clone(),
        file_old: h.file_old().to_string(),
        file_new: h.file_new().to_string(),
        old_start: h.old_start(),
        old_len: h.old_len(),
        new_start: h.new_start(),
        new_len: h.new_len(),
        lines,
    }
}

fn hunk_from_wire(w: HunkWire, path: &str) -> Result<Hunk, SuiteReadError> {
    let mut lines: Vec<HunkLine> = Vec::with_capacity(w.lines.len());
    for (k, raw) in w.lines.iter().enumerate() {
        let at = || format!("{path}.lines[{k}]");
        if raw.starts_with('\\') {
            let prev = lines.last_mut().ok_or_else(|| violation(at(), "marker without a preceding line"))?;
            if prev.no_newline {
                return Err(violation(at(), "repeated no-newline marker"));
            }
            prev.no_newline = true;
            continue;
        }
        let mut chars = raw.chars();
        let kind = chars
            .next()
            .and_then(LineKind::from_prefix)
            .ok_or_else(|| violation(at(), "line must start with ' ', '+', '-' or '\\'"))?;
        lines.push(HunkLine::new(kind, chars.as_str()));
    }
    let hunk = Hunk::with_counts(w.file_old, w.file_new, (w.old_start, w.old_len), (w.new_start, w.new_len), lines)
        .map_err(|e| violation(path, e.to_string()))?;
    if hunk.id() != &w.hunk_id {
        return Err(violation(
            format!("{path}.hunk_id"),
            format!("recorded id {} does not match content id {}", w.hunk_id, hunk.id()),
        ));
    }
    Ok(hunk)
}

fn sort_keys(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sort_keys(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let v = sort_keys(serde_json::to_value(value).expect("in-memory value serializes"));
    let mut s = serde_json::to_string_pretty(&v).expect("value prints");
    s.push('\n');
    s
}

pub fn write_suite(suite: &BenchmarkSuite) -> String {
    let wire = SuiteWire {
        manifest: suite.manifest.clone(),
        instances: suite
            .instances
            .iter()
            .map(|i| InstanceWire {
                service_id: i.service_id.clone(),
                pre_migration_ref: i.pre_migration_ref.clone(),
                kb_id: i.kb_id.clone(),
                kb_version: i.kb_version.clone(),
                hunks: i.hunks.iter().map(hunk_to_wire).collect(),
                provenance: i.provenance.clone(),
            })
            .collect(),
    };
    to_canonical_json(&wire)
}

pub fn read_suite(text: &str) -> Result<BenchmarkSuite, SuiteReadError> {
    let value: Value = serde_json::from_str(text).map_err(|e| violation("", e.to_string()))?;
    let version = value
        .get("manifest")
        .and_then(|m| m.get("format_version"))
        .ok_or_else(|| violation("manifest.format_version", "missing"))?;
    if version.as_u64() != Some(FORMAT_VERSION as u64) {
        return Err(SuiteReadError::VersionMismatch { found: version.to_string(), supported: FORMAT_VERSION });
    }
    let wire: SuiteWire = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        violation(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    })?;

    let mut instances = Vec::with_capacity(wire.instances.len());
    for (i, inst) in wire.instances.into_iter().enumerate() {
        let at = format!("instances[{i}]");
        if inst.hunks.is_empty() {
            return Err(violation(format!("{at}.hunks"), "instance has no hunks"));
        }
        if inst.provenance.len() != inst.hunks.len() {
            return Err(violation(format!("{at}.provenance"), "expected one provenance entry per hunk"));
        }
        let hunks = inst
            .hunks
            .into_iter()
            .enumerate()
            .map(|(j, h)| hunk_from_wire(h, &format!("{at}.hunks[{j}]")))
            .collect::<Result<Vec<_>, _>>()?;
        for (j, (h, p)) in hunks.iter().zip(&inst.provenance).enumerate() {
            if h.id() != &p.hunk_id {
                return Err(violation(format!("{at}.provenance[{j}].hunk_id"), "does not name the matching hunk"));
            }
        }
        instances.push(BenchmarkInstance {
            service_id: inst.service_id,
            pre_migration_ref: inst.pre_migration_ref,
            kb_id: inst.kb_id,
            kb_version: inst.kb_version,
            hunks,
            provenance: inst.provenance,
        });
    }
    for (i, w) in instances.windows(2).enumerate() {
        if (&w[0].service_id, &w[0].kb_id) >= (&w[1].service_id, &w[1].kb_id) {
            return Err(violation(
                format!("instances[{}]", i + 1),
                "instances must be strictly ordered by (service_id, kb_id)",
            ));
        }
    }
    Ok(BenchmarkSuite { manifest: wire.manifest, instances })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchgen::ServiceEntry;
    use crate::matcher::{MatchEvidence, MatcherKind};

    fn sample() -> BenchmarkSuite {
        let mut tail = HunkLine::add("done");
        tail.no_newline = true;
        let h = Hunk::new("run.ps1", "run.ps1", 1, 1, vec![HunkLine::ctx("a"), HunkLine::del("cd C:\\x"), HunkLine::add("cd /x"), tail]);
        BenchmarkSuite {
            manifest: Manifest {
                format_version: FORMAT_VERSION,
                tool_version: "migbench 0.0.0".into(),
                kb_set_hash: "00".into(),
                services: vec![ServiceEntry {
                    service_id: "svc".into(),
                    pre_migration_ref: "base".into(),
                    migration_commits: vec!["c1".into()],
                    snapshot: None,
                }],
                generated_at: "1970-01-01T00:00:00Z".into(),
                config_digest: "ab".into(),
            },
            instances: vec![BenchmarkInstance {
                service_id: "svc".into(),
                pre_migration_ref: "base".into(),
                kb_id: "drives".into(),
                kb_version: "v".into(),
                provenance: vec![ProvenanceEntry {
                    commit_id: "c1".into(),
                    hunk_id: h.id().clone(),
                    evidence: vec![MatchEvidence {
                        kb_id: "drives".into(),
                        matcher_kind: MatcherKind::Keyword,
                        matcher_value: "C:\\".into(),
                        line_index: 1,
                        description: None,
                    }],
                    also_in: vec![],
                }],
                hunks: vec![h],
            }],
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let s = sample();
        let text = write_suite(&s);
        assert!(text.ends_with("}\n"));
        let back = read_suite(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(write_suite(&back), text);
        assert!(text.contains("\"\\\\ No newline at end of file\""));
    }

    #[test]
    fn missing_field_is_schema_violation() {
        let text = write_suite(&sample()).replace("\"pre_migration_ref\": \"base\",\n      \"provenance\"", "\"provenance\"");
        match read_suite(&text) {
            Err(SuiteReadError::SchemaViolation { path, reason }) => {
                assert!(path.starts_with("instances[0]"), "{path}");
                assert!(reason.contains("pre_migration_ref"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn version_and_tampering() {
        let text = write_suite(&sample());
        let v2 = text.replace("\"format_version\": 1", "\"format_version\": 2");
        assert_eq!(
            read_suite(&v2),
            Err(SuiteReadError::VersionMismatch { found: "2".into(), supported: 1 })
        );
        let tampered = text.replace("\"-cd C:\\\\x\"", "\"-cd D:\\\\x\"");
        assert_ne!(tampered, text);
        assert!(matches!(read_suite(&tampered), Err(SuiteReadError::SchemaViolation { path, .. }) if path.ends_with("hunk_id")));
        assert!(matches!(read_suite("{"), Err(SuiteReadError::SchemaViolation { .. })));
    }
}
