//! Acceptance gate: one PASS/FAIL line per criterion.

mod common;
#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use common::{config_in, corpus, kbs_without_keyword, migbench, stderr};
use migbench_core::benchgen::{diff_suites, generate, read_suite, write_suite, GenerateConfig};
use migbench_core::diff::{
    apply_hunks, compute_file_diff, edit_script, parse_unified_diff, render_unified_diff, EditOp, LineEdit, ServiceRecord,
};
use migbench_core::evaluator::{evaluate, f1, line_metrics, match_edits, oracle_patch, AgentPatch, DEFAULT_TAU};
use migbench_core::kb::load_kb_set;
use migbench_core::matcher::MapOptions;
use migbench_core::synth::RulebookBackend;
use migbench_core::{BenchmarkSuite, MappingResult, Synthesizer};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use serde_json::Value;

const F1_TOLERANCE: f64 = 0.01;
const GENERATE_LIMIT: Duration = Duration::from_secs(5);
const MATCHING_LIMIT: Duration = Duration::from_secs(10);
const DIFF_LIMIT: Duration = Duration::from_secs(10);
const MATCHING_CASES: usize = 500;
const DIFF_CASES: usize = 1000;
const AUGMENTATIONS: usize = 100;
const GENERATED_SUITES: usize = 100;
const METRIC_EPS: f64 = 1e-12;

fn report(n: u32, name: &str, outcome: Result<String, String>) {
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    // Written past the test harness capture so the gate is always visible.
    let _ = writeln!(std::io::stderr().lock(), "{tag} criterion {n}: {name} ({detail})");
    if let Err(d) = outcome {
        panic!("criterion {n} failed: {d}");
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn runner() -> TestRunner {
    TestRunner::new_with_rng(Config::default(), TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn sample<S: Strategy>(runner: &mut TestRunner, s: &S) -> S::Value {
    s.new_tree(runner).unwrap().current()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn labels() -> Value {
    serde_json::from_str(&fs::read_to_string(corpus().join("labels.json")).unwrap()).unwrap()
}

fn golden() -> BenchmarkSuite {
    read_suite(&fs::read_to_string(corpus().join("golden/suite.json")).unwrap()).unwrap()
}

fn synth() -> Synthesizer {
    Synthesizer::new(Box::new(RulebookBackend::bundled()))
}

fn records() -> Vec<ServiceRecord> {
    labels()["services"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(id, v)| ServiceRecord {
            service_id: id.clone(),
            source: corpus().join("services").join(id),
            kind: Default::default(),
            pre_ref: v["pre_ref"].as_str().unwrap().into(),
            migration_commits: v["commits"].as_array().unwrap().iter().map(|c| c.as_str().unwrap().into()).collect(),
        })
        .collect()
}

type HunkKey = (String, String, String, u64);

fn label_pairs(field: &str) -> BTreeSet<(HunkKey, String)> {
    let l = labels();
    let mut out = BTreeSet::new();
    for (svc, v) in l["services"].as_object().unwrap() {
        for h in v["hunks"].as_array().unwrap() {
            let key = (
                svc.clone(),
                h["commit"].as_str().unwrap().to_string(),
                h["path"].as_str().unwrap().to_string(),
                h["old_start"].as_u64().unwrap(),
            );
            for kb in h[field].as_array().unwrap() {
                out.insert((key.clone(), kb.as_str().unwrap().to_string()));
            }
        }
    }
    out
}

#[test]
fn criterion_1_f1_arithmetic() {
    let rows = [((1.0, 0.5), 0.66), ((1.0, 0.4), 0.57), ((1.0, 0.667), 0.80), ((1.0, 0.25), 0.40)];
    let outcome = (|| {
        let mut shown = Vec::new();
        for ((p, r), printed) in rows {
            let v = f1(p, r).map_err(|_| format!("f1({p}, {r}) rejected"))?;
            ensure((v - printed).abs() <= F1_TOLERANCE, || format!("f1({p}, {r}) = {v:.4}, printed {printed}"))?;
            shown.push(format!("{v:.3}"));
        }
        Ok(format!("{} within ±{F1_TOLERANCE}", shown.join(", ")))
    })();
    report(1, "F1 matches the four reference rows", outcome);
}

#[test]
fn criterion_2_fixture_generation() {
    let outcome = (|| {
        let l = labels();
        let services = l["services"].as_object().unwrap();
        let commits: usize = services.values().map(|v| v["commits"].as_array().unwrap().len()).sum();
        let kbs = load_kb_set(&corpus().join("kbs")).map_err(|e| e.to_string())?;
        ensure(services.len() == 4 && commits >= 50 && kbs.len() == 6, || {
            format!("corpus has {} services, {commits} commits, {} KBs", services.len(), kbs.len())
        })?;

        let out = tempfile::tempdir().unwrap();
        let started = Instant::now();
        let o = migbench(&["--config", s(&corpus().join("migbench.toml")), "generate", "--reproducible", "--out", s(out.path())]);
        let took = started.elapsed();
        ensure(o.status.success(), || format!("generate failed: {}", stderr(&o)))?;
        ensure(took < GENERATE_LIMIT, || format!("generate took {took:?}"))?;

        let got = fs::read_to_string(out.path().join("suite.json")).unwrap();
        let want = fs::read_to_string(corpus().join("golden/suite.json")).unwrap();
        ensure(got == want, || "suite differs from the golden file".into())?;

        let mappings: Vec<MappingResult> =
            serde_json::from_str(&fs::read_to_string(out.path().join("mapping.json")).unwrap()).unwrap();
        let mut predicted = BTreeSet::new();
        for m in &mappings {
            for a in &m.assignments {
                let key = (m.service_id.clone(), a.hunk.commit_id.clone(), a.hunk.path.clone(), a.hunk.old_start as u64);
                for k in &a.kbs {
                    predicted.insert((key.clone(), k.kb_id.clone()));
                }
            }
        }
        let truth = label_pairs("kbs");
        let hit = predicted.intersection(&truth).count();
        let (p, r) = (hit as f64 / predicted.len() as f64, hit as f64 / truth.len() as f64);
        ensure(p == 1.0 && r == 1.0, || format!("mapping precision {p:.3}, recall {r:.3}"))?;
        Ok(format!("{commits} commits, {} labelled pairs, P = R = 1, golden byte-equal, {took:.2?}", truth.len()))
    })();
    report(2, "fixture corpus generates the hand-labelled golden suite", outcome);
}

#[test]
fn criterion_3_matching_oracle() {
    let outcome = (|| {
        let mut runner = runner();
        let started = Instant::now();
        let (pred_s, truth_s, tau_s) = (support::gen::edits(8), support::gen::edits(8), support::gen::tau());
        let mut paired = 0;
        for case in 0..MATCHING_CASES {
            let (pred, truth, tau) = (sample(&mut runner, &pred_s), sample(&mut runner, &truth_s), sample(&mut runner, &tau_s));
            let m = match_edits(&pred, &truth, tau);
            let (best, _) = support::oracles::best_assignment(&pred, &truth, tau);
            ensure(m.pairs.len() == best, || format!("case {case}: {} pairs, oracle {best}", m.pairs.len()))?;
            let exact = match_edits(&pred, &truth, 0.0);
            let inter = support::oracles::exact_intersection(&pred, &truth);
            ensure(exact.pairs.len() == inter && exact.pairs.iter().all(|p| p.predicted.content == p.truth.content), || {
                format!("case {case}: tau 0 gave {} pairs, intersection {inter}", exact.pairs.len())
            })?;
            paired += best;
        }
        let took = started.elapsed();
        ensure(took < MATCHING_LIMIT, || format!("took {took:?}"))?;
        Ok(format!("{MATCHING_CASES} cases, {paired} pairs total, {took:.2?}"))
    })();
    report(3, "edit matching equals the exhaustive assignment maximum", outcome);
}

fn replays(old: &[String], new: &[String], script: &[EditOp]) -> bool {
    let (mut i, mut j) = (0, 0);
    for op in script {
        match *op {
            EditOp::Equal { old: o, new: n } if o == i && n == j && o < old.len() && n < new.len() && old[o] == new[n] => {
                i += 1;
                j += 1;
            }
            EditOp::Delete { old: o } if o == i && o < old.len() => i += 1,
            EditOp::Insert { new: n } if n == j && n < new.len() => j += 1,
            _ => return false,
        }
    }
    i == old.len() && j == new.len()
}

#[test]
fn criterion_4_diff_engine() {
    let outcome = (|| {
        let mut runner = runner();
        let seq = support::gen::line_seq(40);
        let started = Instant::now();
        for case in 0..DIFF_CASES {
            let (old, new) = (sample(&mut runner, &seq), sample(&mut runner, &seq));
            let script = edit_script(&old, &new);
            ensure(replays(&old, &new, &script), || format!("case {case}: script does not replay"))?;
            let equal = script.iter().filter(|op| matches!(op, EditOp::Equal { .. })).count();
            let lcs = support::oracles::lcs_len(&old, &new);
            ensure(equal == lcs, || format!("case {case}: {equal} kept lines, LCS {lcs}"))?;
            let hunks = compute_file_diff("f", "f", &old, &new, case % 4);
            let applied = apply_hunks(&old, &hunks).map_err(|e| format!("case {case}: {e}"))?;
            ensure(applied == new, || format!("case {case}: hunks do not apply back"))?;
        }
        let mut patches = 0;
        for entry in walkdir::WalkDir::new(corpus().join("services")).sort_by_file_name() {
            let entry = entry.unwrap();
            if entry.path().extension().is_some_and(|e| e == "patch") {
                let files = parse_unified_diff(&fs::read_to_string(entry.path()).unwrap()).map_err(|e| e.to_string())?;
                let again = parse_unified_diff(&render_unified_diff(&files)).map_err(|e| e.to_string())?;
                ensure(again == files, || format!("{} does not round-trip", entry.path().display()))?;
                patches += 1;
            }
        }
        let took = started.elapsed();
        ensure(took < DIFF_LIMIT, || format!("took {took:?}"))?;
        Ok(format!("{DIFF_CASES} sequence pairs, {patches} corpus patches, {took:.2?}"))
    })();
    report(4, "diff scripts are LCS-minimal, apply back, and round-trip", outcome);
}

fn truth_edits(suite: &BenchmarkSuite, service: &str) -> Vec<LineEdit> {
    oracle_patch(suite, service).iter().flat_map(|f| f.hunks.iter().flat_map(|h| h.line_edits())).collect()
}

#[test]
fn criterion_5_metric_identities() {
    let outcome = (|| {
        let suite = golden();
        let kbs = load_kb_set(&corpus().join("kbs")).map_err(|e| e.to_string())?;
        let synth = synth();
        let services: Vec<String> = suite.manifest.services.iter().map(|s| s.service_id.clone()).collect();
        let eval = |files| {
            evaluate(&files, &suite, &kbs, &synth, DEFAULT_TAU, MapOptions::default()).map_err(|e| e.to_string())
        };
        for svc in &services {
            let r = eval(AgentPatch { service_id: svc.clone(), files: oracle_patch(&suite, svc) })?;
            let one = |v: Option<f64>| v.is_some_and(|x| (x - 1.0).abs() < METRIC_EPS);
            ensure(one(r.line_precision) && one(r.line_recall) && one(r.line_f1) && one(r.kb_recall), || {
                format!("{svc}: oracle patch scored {:?}/{:?}/{:?}, kb recall {:?}", r.line_precision, r.line_recall, r.line_f1, r.kb_recall)
            })?;
            let e = eval(AgentPatch { service_id: svc.clone(), files: Vec::new() })?;
            ensure(e.line_recall == Some(0.0) && e.line_precision.is_none() && e.line_f1.is_none(), || {
                format!("{svc}: empty patch scored {:?}/{:?}/{:?}", e.line_precision, e.line_recall, e.line_f1)
            })?;
        }

        let mut runner = runner();
        let noise = support::gen::edits(6);
        for case in 0..AUGMENTATIONS {
            let svc = &services[case % services.len()];
            let truth = truth_edits(&suite, svc);
            let picks = sample(&mut runner, &proptest::collection::vec(proptest::bool::ANY, truth.len()));
            let mut pred: Vec<LineEdit> = truth.iter().zip(&picks).filter(|(_, &k)| k).map(|(e, _)| e.clone()).collect();
            pred.extend(sample(&mut runner, &noise));
            let add = sample(&mut runner, &(0..truth.len()));
            let before = line_metrics(&match_edits(&pred, &truth, DEFAULT_TAU)).recall.unwrap();
            pred.push(truth[add].clone());
            let after = line_metrics(&match_edits(&pred, &truth, DEFAULT_TAU)).recall.unwrap();
            ensure(after + METRIC_EPS >= before, || format!("augmentation {case}: recall {before} -> {after}"))?;
        }
        Ok(format!("{} services, {AUGMENTATIONS} augmentations", services.len()))
    })();
    report(5, "oracle, empty and augmented patches obey the metric identities", outcome);
}

#[test]
fn criterion_6_continuous_evolution() {
    let outcome = (|| {
        // Silent KB.
        let dir = tempfile::tempdir().unwrap();
        let kb_dir = dir.path().join("kbs");
        fs::create_dir_all(&kb_dir).unwrap();
        for entry in fs::read_dir(corpus().join("kbs")).unwrap() {
            let p = entry.unwrap().path();
            fs::copy(&p, kb_dir.join(p.file_name().unwrap())).unwrap();
        }
        fs::write(
            kb_dir.join("cobol-copybooks.kb.md"),
            "---\nid: cobol-copybooks\ntitle: Port COBOL copybooks\nkeywords: [IDENTIFICATION DIVISION]\n---\n\nMainframe programs are out of scope for these services.\n",
        )
        .unwrap();
        let kbs = load_kb_set(&kb_dir).map_err(|e| e.to_string())?;
        let out = generate(&records(), &kbs, &synth(), &GenerateConfig::default()).map_err(|e| e.to_string())?;
        ensure(out.feedback.silent_kbs == ["cobol-copybooks"], || format!("silent KBs {:?}", out.feedback.silent_kbs))?;
        ensure(out.suite.instances.iter().all(|i| i.kb_id != "cobol-copybooks"), || "silent KB has an instance".into())?;

        // Keyword edit.
        let l = labels();
        let edit = &l["edit"];
        let edited = kbs_without_keyword(&dir.path().join("edited"), edit["kb_id"].as_str().unwrap(), edit["removed_keyword"].as_str().unwrap());
        let kbs = load_kb_set(&edited).map_err(|e| e.to_string())?;
        let after = generate(&records(), &kbs, &synth(), &GenerateConfig::default()).map_err(|e| e.to_string())?;
        let before = golden();
        let delta = diff_suites(&before, &after.suite);
        let ids: BTreeMap<(String, String, u64), String> = before
            .instances
            .iter()
            .flat_map(|i| i.provenance.iter().zip(&i.hunks))
            .map(|(p, h)| ((p.commit_id.clone(), h.path().to_string(), h.old_start() as u64), h.id().to_string()))
            .collect();
        let refs = |v: &Value| -> Vec<String> {
            let mut out: Vec<String> = v
                .as_array()
                .unwrap()
                .iter()
                .map(|r| {
                    ids[&(r["commit"].as_str().unwrap().into(), r["path"].as_str().unwrap().into(), r["old_start"].as_u64().unwrap())].clone()
                })
                .collect();
            out.sort();
            out
        };
        let keys = |v: &Value| -> Vec<String> { v.as_array().unwrap().iter().map(|k| k.as_str().unwrap().to_string()).collect() };
        let want = &edit["expected_delta"];
        let got_changed: Vec<(String, Vec<String>, Vec<String>)> = delta
            .changed
            .iter()
            .map(|c| {
                let mut a: Vec<String> = c.hunks_added.iter().map(|h| h.to_string()).collect();
                let mut r: Vec<String> = c.hunks_removed.iter().map(|h| h.to_string()).collect();
                a.sort();
                r.sort();
                (c.key.to_string(), a, r)
            })
            .collect();
        let want_changed: Vec<(String, Vec<String>, Vec<String>)> = want["changed"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| (c["key"].as_str().unwrap().to_string(), refs(&c["hunks_added"]), refs(&c["hunks_removed"])))
            .collect();
        ensure(delta.added.iter().map(|k| k.to_string()).collect::<Vec<_>>() == keys(&want["added"]), || format!("added {:?}", delta.added))?;
        ensure(delta.removed.iter().map(|k| k.to_string()).collect::<Vec<_>>() == keys(&want["removed"]), || format!("removed {:?}", delta.removed))?;
        ensure(got_changed == want_changed, || format!("changed {got_changed:?}, expected {want_changed:?}"))?;

        // Reproducible generation with a warm cache.
        let cache = dir.path().join("cache");
        let cfg = config_in(dir.path(), &format!("cache_dir = \"{}\"", cache.display()), &corpus().join("kbs"));
        let mut runs = Vec::new();
        for name in ["first", "second"] {
            let out = dir.path().join(name);
            let o = migbench(&["--config", s(&cfg), "generate", "--reproducible", "--out", s(&out)]);
            ensure(o.status.success(), || stderr(&o))?;
            runs.push(["suite.json", "feedback.json", "mapping.json"].map(|f| fs::read(out.join(f)).unwrap()));
        }
        ensure(runs[0] == runs[1], || "warm-cache rerun is not byte-identical".into())?;
        Ok(format!(
            "silent KB reported, delta -{} ~{} as predicted, rerun byte-identical",
            delta.removed.len(),
            delta.changed.len()
        ))
    })();
    report(6, "silent KB, predicted keyword-edit delta, reproducible reruns", outcome);
}

#[test]
fn criterion_7_serialization_round_trip() {
    let outcome = (|| {
        let check = |suite: &BenchmarkSuite, what: &str| -> Result<(), String> {
            let text = write_suite(suite);
            let back = read_suite(&text).map_err(|e| format!("{what}: {e}"))?;
            ensure(&back == suite, || format!("{what}: read(write(s)) differs"))?;
            ensure(write_suite(&back) == text, || format!("{what}: write(read(doc)) differs"))
        };
        let doc = fs::read_to_string(corpus().join("golden/suite.json")).unwrap();
        let fixture = read_suite(&doc).map_err(|e| e.to_string())?;
        ensure(write_suite(&fixture) == doc, || "golden document is not canonical".into())?;
        check(&fixture, "fixture")?;
        let mut runner = runner();
        let strategy = support::gen::suite();
        for n in 0..GENERATED_SUITES {
            check(&sample(&mut runner, &strategy), &format!("generated suite {n}"))?;
        }
        Ok(format!("fixture + {GENERATED_SUITES} generated suites"))
    })();
    report(7, "suite serialization round-trips structurally and byte-exactly", outcome);
}
