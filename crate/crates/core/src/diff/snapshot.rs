use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;
use walkdir::WalkDir;

use super::{diff_texts, FileDiff, FileStatus, DEV_NULL};

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("cannot read snapshot {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot walk snapshot {path}: {reason}")]
    Walk { path: PathBuf, reason: String },
}

fn relative_files(root: &Path) -> Result<BTreeSet<String>, SnapshotError> {
    let mut files = BTreeSet::new();
    if !root.exists() {
        return Ok(files);
    }
    let walker = WalkDir::new(root)
        .into_iter()
        .filter_entry(|e| e.file_name() != ".git");
    for entry in walker {
        let entry = entry.map_err(|e| SnapshotError::Walk {
            path: root.to_path_buf(),
            reason: e.to_string(),
        })?;
        if entry.file_type().is_file() {
            let rel = entry.path().strip_prefix(root).unwrap_or(entry.path());
            let rel: Vec<_> = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect();
            files.insert(rel.join("/"));
        }
    }
    Ok(files)
}

fn read(path: PathBuf) -> Result<Vec<u8>, SnapshotError> {
    fs::read(&path).map_err(|source| SnapshotError::Io { path, source })
}

fn is_binary(bytes: &[u8]) -> bool {
    bytes.contains(&0)
}

/// Diffs two directory trees. Files present on one side only become
/// ADDED/DELETED; renames are never inferred. Output is sorted by path.
pub fn diff_snapshots(old_root: &Path, new_root: &Path, context: usize) -> Result<Vec<FileDiff>, SnapshotError> {
    let old_files = relative_files(old_root)?;
    let new_files = relative_files(new_root)?;
    let all: Vec<&String> = old_files.union(&new_files).collect();

    let diffs: Vec<Option<FileDiff>> = all
        .par_iter()
        .map(|rel| -> Result<Option<FileDiff>, SnapshotError> {
            let in_old = old_files.contains(*rel);
            let in_new = new_files.contains(*rel);
            let old_bytes = if in_old { read(old_root.join(rel.as_str()))? } else { Vec::new() };
            let new_bytes = if in_new { read(new_root.join(rel.as_str()))? } else { Vec::new() };
            if in_old && in_new && old_bytes == new_bytes {
                return Ok(None);
            }
            let (status, old_path, new_path) = match (in_old, in_new) {
                (true, true) => (FileStatus::Modified, rel.to_string(), rel.to_string()),
                (false, _) => (FileStatus::Added, DEV_NULL.to_string(), rel.to_string()),
                (_, false) => (FileStatus::Deleted, rel.to_string(), DEV_NULL.to_string()),
            };
            let binary = is_binary(&old_bytes) || is_binary(&new_bytes);
            let hunks = if binary {
                Vec::new()
            } else {
                let old_text = String::from_utf8_lossy(&old_bytes);
                let new_text = String::from_utf8_lossy(&new_bytes);
                diff_texts(&old_path, &new_path, &old_text, &new_text, context)
            };
            Ok(Some(FileDiff { old_path, new_path, status, binary, hunks }))
        })
        .collect::<Result<_, _>>()?;
    Ok(diffs.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::LineKind;

    #[test]
    fn snapshot_statuses() {
        let old = tempfile::tempdir().unwrap();
        let new = tempfile::tempdir().unwrap();
        fs::create_dir_all(old.path().join("scripts")).unwrap();
        fs::create_dir_all(new.path().join("scripts")).unwrap();
        fs::write(old.path().join("scripts/build.cmd"), "cd C:\\build\r\n").unwrap();
        fs::write(old.path().join("same.txt"), "same\n").unwrap();
        fs::write(new.path().join("same.txt"), "same\n").unwrap();
        fs::write(old.path().join("scripts/run.sh"), "a\nb\nc\n").unwrap();
        fs::write(new.path().join("scripts/run.sh"), "a\nx\nc\n").unwrap();
        fs::write(new.path().join("Dockerfile"), "FROM ubuntu:22.04\n").unwrap();
        fs::write(new.path().join("logo.png"), [0u8, 1, 2]).unwrap();

        let diffs = diff_snapshots(old.path(), new.path(), 3).unwrap();
        let summary: Vec<_> = diffs.iter().map(|d| (d.path().to_string(), d.status, d.binary)).collect();
        assert_eq!(
            summary,
            vec![
                ("Dockerfile".into(), FileStatus::Added, false),
                ("logo.png".into(), FileStatus::Added, true),
                ("scripts/build.cmd".into(), FileStatus::Deleted, false),
                ("scripts/run.sh".into(), FileStatus::Modified, false),
            ]
        );
        assert!(diffs[0].hunks[0].lines().iter().all(|l| l.kind == LineKind::Add));
        assert!(diffs[2].hunks[0].lines().iter().all(|l| l.kind == LineKind::Del));
        for d in &diffs {
            d.check().unwrap();
        }
    }
}
