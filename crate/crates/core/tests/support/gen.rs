//! proptest strategies shared by the property suites and the acceptance run.

#![allow(dead_code)]

use std::collections::BTreeMap;

use migbench_core::benchgen::{BenchmarkInstance, BenchmarkSuite, Manifest, ProvenanceEntry, ServiceEntry};
use migbench_core::diff::{EditKind, Hunk, HunkLine, LineEdit, LineKind};
use migbench_core::matcher::{MatchEvidence, MatcherKind};
use proptest::prelude::*;

/// Short sequences over a small alphabet, so common subsequences are likely.
pub fn line_seq(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d"]), 0..=max)
        .prop_map(|v| v.into_iter().map(String::from).collect())
}

pub fn edit() -> impl Strategy<Value = LineEdit> {
    (
        prop::sample::select(vec!["run.ps1", "deploy.sh"]),
        prop::bool::ANY,
        "[ab]{0,5}",
        1u32..40,
    )
        .prop_map(|(file, add, content, anchor)| LineEdit {
            file: file.to_string(),
            op: if add { EditKind::Add } else { EditKind::Del },
            content,
            anchor,
        })
}

pub fn edits(max: usize) -> impl Strategy<Value = Vec<LineEdit>> {
    prop::collection::vec(edit(), 0..=max)
}

pub fn tau() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![0.0, 0.2, 0.25, 0.34, 0.5, 0.75, 1.0])
}

fn text() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9 \\\\\"'{}:/.é-]{0,12}"
}

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9-]{0,8}"
}

pub fn hunk() -> impl Strategy<Value = Hunk> {
    let line = (prop::sample::select(vec![LineKind::Ctx, LineKind::Add, LineKind::Del]), text());
    (
        prop::sample::select(vec!["src/a.cs", "run.ps1", "Dockerfile", "/dev/null"]),
        prop::sample::select(vec!["src/a.cs", "run.ps1", "deploy/k8s/x.yaml"]),
        0u32..200,
        0u32..200,
        prop::collection::vec(line, 1..8),
        prop::bool::ANY,
    )
        .prop_map(|(old, new, os, ns, body, eof)| {
            let mut lines: Vec<HunkLine> = body.into_iter().map(|(k, t)| HunkLine::new(k, t)).collect();
            if eof {
                lines.last_mut().unwrap().no_newline = true;
            }
            Hunk::new(old, new, os, ns, lines)
        })
}

fn evidence() -> impl Strategy<Value = MatchEvidence> {
    (ident(), prop::bool::ANY, text(), 0usize..8, prop::option::of(text())).prop_map(|(kb, kw, value, idx, desc)| {
        MatchEvidence {
            kb_id: kb,
            matcher_kind: if kw { MatcherKind::Keyword } else { MatcherKind::Pattern },
            matcher_value: value,
            line_index: idx,
            description: desc,
        }
    })
}

/// Hunk, commit id, evidence, also_in.
type HunkEntry = (Hunk, String, Vec<MatchEvidence>, Vec<String>);

fn instance_body() -> impl Strategy<Value = (String, String, Vec<HunkEntry>)> {
    (
        "[0-9a-f]{12}",
        "[0-9a-f]{64}",
        prop::collection::vec(
            (hunk(), "[0-9a-f]{12}", prop::collection::vec(evidence(), 1..3), prop::collection::vec(ident(), 0..2)),
            1..4,
        ),
    )
}

pub fn suite() -> impl Strategy<Value = BenchmarkSuite> {
    (
        prop::collection::btree_map((ident(), ident()), instance_body(), 0..6),
        "[0-9a-f]{64}",
        prop::option::of(prop::collection::btree_map("[a-z/]{1,10}", "[0-9a-f]{8}", 0..3)),
    )
        .prop_map(|(bodies, kb_hash, snapshot)| {
            let mut services: BTreeMap<String, ServiceEntry> = BTreeMap::new();
            let mut instances = Vec::new();
            for ((svc, kb), (pre, version, hunks)) in bodies {
                let entry = services.entry(svc.clone()).or_insert_with(|| ServiceEntry {
                    service_id: svc.clone(),
                    pre_migration_ref: pre.clone(),
                    migration_commits: Vec::new(),
                    snapshot: snapshot.clone(),
                });
                let mut inst = BenchmarkInstance {
                    service_id: svc,
                    pre_migration_ref: entry.pre_migration_ref.clone(),
                    kb_id: kb,
                    kb_version: version,
                    hunks: Vec::new(),
                    provenance: Vec::new(),
                };
                for (h, commit, evidence, also_in) in hunks {
                    entry.migration_commits.push(commit.clone());
                    inst.provenance.push(ProvenanceEntry { commit_id: commit, hunk_id: h.id().clone(), evidence, also_in });
                    inst.hunks.push(h);
                }
                instances.push(inst);
            }
            BenchmarkSuite {
                manifest: Manifest {
                    format_version: migbench_core::benchgen::FORMAT_VERSION,
                    tool_version: "migbench 0.1.0".into(),
                    kb_set_hash: kb_hash,
                    services: services.into_values().collect(),
                    generated_at: "1970-01-01T00:00:00Z".into(),
                    config_digest: "00".into(),
                },
                instances,
            }
        })
}
