//! The committed fixture corpus against its hand labels.

use std::collections::BTreeMap;
use std::path::PathBuf;

use migbench_core::benchgen::{generate, GenerateConfig, GenerateOutput};
use migbench_core::diff::ServiceRecord;
use migbench_core::kb::load_kb_set;
use migbench_core::synth::RulebookBackend;
use migbench_core::{KbSet, Synthesizer};
use serde_json::Value;

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/corpus")
}

fn labels() -> Value {
    let text = std::fs::read_to_string(corpus().join("labels.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn records(labels: &Value) -> Vec<ServiceRecord> {
    labels["services"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(id, s)| ServiceRecord {
            service_id: id.clone(),
            source: corpus().join("services").join(id),
            kind: Default::default(),
            pre_ref: s["pre_ref"].as_str().unwrap().into(),
            migration_commits: s["commits"].as_array().unwrap().iter().map(|c| c.as_str().unwrap().into()).collect(),
        })
        .collect()
}

type Key = (String, String, String, u32);

/// (service, commit, path, old_start) -> sorted KB ids, for every text hunk.
fn labelled(labels: &Value, field: &str) -> BTreeMap<Key, Vec<String>> {
    let mut out = BTreeMap::new();
    for (id, s) in labels["services"].as_object().unwrap() {
        for h in s["hunks"].as_array().unwrap() {
            let key = (
                id.clone(),
                h["commit"].as_str().unwrap().to_string(),
                h["path"].as_str().unwrap().to_string(),
                h["old_start"].as_u64().unwrap() as u32,
            );
            let kbs = h[field].as_array().unwrap().iter().map(|k| k.as_str().unwrap().to_string()).collect();
            assert!(out.insert(key, kbs).is_none(), "duplicate label row");
        }
    }
    out
}

fn mapped(out: &GenerateOutput) -> BTreeMap<Key, Vec<String>> {
    let mut got = BTreeMap::new();
    for m in &out.mappings {
        for a in &m.assignments {
            let h = &a.hunk;
            let kbs = a.kbs.iter().map(|k| k.kb_id.clone()).collect();
            got.insert((m.service_id.clone(), h.commit_id.clone(), h.path.clone(), h.old_start), kbs);
        }
        for h in &m.unmatched {
            got.insert((m.service_id.clone(), h.commit_id.clone(), h.path.clone(), h.old_start), Vec::new());
        }
    }
    got
}

fn run(kbs: &KbSet) -> GenerateOutput {
    let synth = Synthesizer::new(Box::new(RulebookBackend::bundled()));
    generate(&records(&labels()), kbs, &synth, &GenerateConfig::default()).unwrap()
}

#[test]
fn corpus_shape() {
    let l = labels();
    let services = l["services"].as_object().unwrap();
    assert_eq!(services.len(), 4);
    let commits: usize = services.values().map(|s| s["commits"].as_array().unwrap().len()).sum();
    assert!(commits >= 50, "{commits}");
    assert_eq!(load_kb_set(&corpus().join("kbs")).unwrap().len(), 6);
}

#[test]
fn mapping_matches_hand_labels() {
    let l = labels();
    let out = run(&load_kb_set(&corpus().join("kbs")).unwrap());
    let want = labelled(&l, "kbs");
    let got = mapped(&out);
    for (k, v) in &want {
        assert_eq!(got.get(k), Some(v), "hunk {k:?}");
    }
    assert_eq!(got.len(), want.len());
}

#[test]
fn kb_docs_lint_clean() {
    let kbs = load_kb_set(&corpus().join("kbs")).unwrap();
    for doc in kbs.docs() {
        let diags = migbench_core::kb::lint_kb(doc);
        assert!(diags.is_empty(), "{}: {diags:?}", doc.id);
    }
}

#[test]
fn keyword_edit_matches_after_edit_labels() {
    let l = labels();
    let kb_id = l["edit"]["kb_id"].as_str().unwrap();
    let keyword = l["edit"]["removed_keyword"].as_str().unwrap();
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(corpus().join("kbs")).unwrap() {
        let p = entry.unwrap().path();
        let mut text = std::fs::read_to_string(&p).unwrap();
        if p.file_name().unwrap().to_str().unwrap().starts_with(kb_id) {
            let edited = text.replace(&format!("{keyword}, "), "");
            assert_ne!(edited, text);
            text = edited;
        }
        std::fs::write(dir.path().join(p.file_name().unwrap()), text).unwrap();
    }
    let out = run(&load_kb_set(dir.path()).unwrap());
    assert_eq!(mapped(&out), labelled(&l, "kbs_after_edit"));
}
