mod support;

use migbench_core::diff::{
    apply_hunks, compute_file_diff, edit_script, parse_unified_diff, render_unified_diff, EditOp, FileDiff, FileStatus,
};
use proptest::prelude::*;
use support::gen::line_seq;
use support::oracles::lcs_len;

/// Replays a script against both inputs; None if it is not a valid
/// old -> new transcript.
fn replay(old: &[String], new: &[String], script: &[EditOp]) -> Option<Vec<String>> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    for op in script {
        match *op {
            EditOp::Equal { old: o, new: n } => {
                if o != i || n != j || old.get(o)? != new.get(n)? {
                    return None;
                }
                out.push(old[o].clone());
                i += 1;
                j += 1;
            }
            EditOp::Delete { old: o } => {
                if o != i || o >= old.len() {
                    return None;
                }
                i += 1;
            }
            EditOp::Insert { new: n } => {
                if n != j {
                    return None;
                }
                out.push(new.get(n)?.clone());
                j += 1;
            }
        }
    }
    (i == old.len() && j == new.len()).then_some(out)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn script_is_a_minimal_transcript(old in line_seq(40), new in line_seq(40)) {
        let script = edit_script(&old, &new);
        prop_assert_eq!(replay(&old, &new, &script), Some(new.clone()));
        let equal = script.iter().filter(|op| matches!(op, EditOp::Equal { .. })).count();
        prop_assert_eq!(equal, lcs_len(&old, &new));
    }

    #[test]
    fn hunks_apply_back(old in line_seq(40), new in line_seq(40), context in 0usize..4) {
        let hunks = compute_file_diff("f.txt", "f.txt", &old, &new, context);
        prop_assert_eq!(apply_hunks(&old, &hunks).unwrap(), new);
    }

    #[test]
    fn render_then_parse_is_identity(old in line_seq(30), new in line_seq(30), context in 0usize..4) {
        let hunks = compute_file_diff("src/f.txt", "src/f.txt", &old, &new, context);
        prop_assume!(!hunks.is_empty());
        let d = FileDiff {
            old_path: "src/f.txt".into(),
            new_path: "src/f.txt".into(),
            status: FileStatus::Modified,
            binary: false,
            hunks,
        };
        let text = render_unified_diff(std::slice::from_ref(&d));
        prop_assert_eq!(parse_unified_diff(&text).unwrap(), vec![d]);
    }
}

#[test]
fn corpus_patches_round_trip() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/corpus/services");
    let mut seen = 0;
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.unwrap();
        if entry.path().extension().is_some_and(|e| e == "patch") {
            let files = parse_unified_diff(&std::fs::read_to_string(entry.path()).unwrap()).unwrap();
            let again = parse_unified_diff(&render_unified_diff(&files)).unwrap();
            assert_eq!(again, files, "{}", entry.path().display());
            seen += 1;
        }
    }
    assert!(seen >= 50);
}
