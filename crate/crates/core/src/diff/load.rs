use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::PathBuf;
use std::process::Command;
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::parse::parse_with_preamble;
use super::{CommitDiff, FileDiff, ParseError};

static PATCH_NAME: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\d{4}-(.+)\.patch$").unwrap());
static SLUG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[a-z0-9-]+$").unwrap());

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    /// A directory of `NNNN-<commitid>.patch` files.
    #[default]
    Patches,
    /// A version-control working copy queried through [`VcsTool`].
    Vcs,
}

/// A migrated service: where its commits live and which of them carried
/// the migration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceRecord {
    pub service_id: String,
    pub source: PathBuf,
    #[serde(default)]
    pub kind: SourceKind,
    pub pre_ref: String,
    pub migration_commits: Vec<String>,
}

impl ServiceRecord {
    pub fn validate(&self) -> Result<(), LoadError> {
        if !SLUG.is_match(&self.service_id) {
            return Err(LoadError::InvalidRecord(format!(
                "service id `{}` is not a lowercase slug",
                self.service_id
            )));
        }
        if self.migration_commits.is_empty() {
            return Err(LoadError::InvalidRecord(format!(
                "service `{}` lists no migration commits",
                self.service_id
            )));
        }
        Ok(())
    }
}

/// External version-control tool. Argument templates may use `{source}`,
/// `{commit}` (diff) and `{ref}` (snapshot).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VcsTool {
    pub program: String,
    pub diff_args: Vec<String>,
    pub snapshot_args: Vec<String>,
}

impl Default for VcsTool {
    fn default() -> Self {
        let args = |a: &[&str]| a.iter().map(|s| s.to_string()).collect();
        Self {
            program: "git".into(),
            diff_args: args(&[
                "-C",
                "{source}",
                "format-patch",
                "-1",
                "--stdout",
                "--no-stat",
                "--no-color",
                "--no-signature",
                "{commit}",
            ]),
            snapshot_args: args(&["-C", "{source}", "ls-tree", "-r", "{ref}"]),
        }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read service source {path}: {reason}")]
    UnreadableSource { path: PathBuf, reason: String },
    #[error("migration commit `{0}` not found")]
    MissingCommit(String),
    #[error("commit `{commit}`: {source}")]
    Parse {
        commit: String,
        #[source]
        source: ParseError,
    },
    #[error("`{program}` failed for `{commit}` ({status}): {stderr}")]
    ToolFailed {
        program: String,
        commit: String,
        status: String,
        stderr: String,
    },
    #[error("{0}")]
    InvalidRecord(String),
}

/// Extracts the commit message from a patch preamble. Understands
/// `git format-patch` mail headers; anything else is taken verbatim.
fn message_from_preamble(preamble: &[&str]) -> String {
    let is_mail = preamble.first().is_some_and(|l| l.starts_with("From "));
    if !is_mail {
        return preamble.join("\n").trim().to_string();
    }
    let mut subject = String::new();
    let mut body = Vec::new();
    let mut in_headers = true;
    let mut in_subject = false;
    for line in &preamble[1..] {
        if in_headers {
            if line.is_empty() {
                in_headers = false;
            } else if let Some(s) = line.strip_prefix("Subject: ") {
                subject = s.to_string();
                in_subject = true;
            } else if in_subject && line.starts_with([' ', '\t']) {
                subject.push(' ');
                subject.push_str(line.trim());
            } else {
                in_subject = false;
            }
            continue;
        }
        if *line == "---" {
            break;
        }
        body.push(*line);
    }
    let subject = match subject.strip_prefix("[PATCH") {
        Some(rest) => rest.split_once("] ").map_or(rest, |(_, s)| s),
        None => &subject,
    };
    let body = body.join("\n");
    let body = body.trim();
    if body.is_empty() {
        subject.trim().to_string()
    } else {
        format!("{}\n\n{}", subject.trim(), body)
    }
}

/// Parses one commit's patch text. Repeated sections for the same file pair
/// are merged.
pub fn parse_commit_patch(commit_id: &str, parent_id: &str, text: &str) -> Result<CommitDiff, ParseError> {
    let (preamble, files) = parse_with_preamble(text)?;
    let mut merged: Vec<FileDiff> = Vec::with_capacity(files.len());
    for f in files {
        match merged
            .iter_mut()
            .find(|m| m.old_path == f.old_path && m.new_path == f.new_path)
        {
            Some(existing) => {
                existing.hunks.extend(f.hunks);
                existing.hunks.sort_by_key(|h| h.old_start());
                existing.binary |= f.binary;
            }
            None => merged.push(f),
        }
    }
    Ok(CommitDiff {
        commit_id: commit_id.to_string(),
        parent_id: parent_id.to_string(),
        message: message_from_preamble(&preamble),
        files: merged,
    })
}

fn substitute(template: &[String], vars: &[(&str, &str)]) -> Vec<String> {
    template
        .iter()
        .map(|arg| {
            vars.iter()
                .fold(arg.clone(), |acc, (k, v)| acc.replace(&format!("{{{k}}}"), v))
        })
        .collect()
}

fn run_tool(tool: &VcsTool, template: &[String], vars: &[(&str, &str)], what: &str) -> Result<String, LoadError> {
    let args = substitute(template, vars);
    log::debug!("running {} {}", tool.program, args.join(" "));
    let output = Command::new(&tool.program)
        .args(&args)
        .output()
        .map_err(|e| LoadError::ToolFailed {
            program: tool.program.clone(),
            commit: what.to_string(),
            status: "spawn".into(),
            stderr: e.to_string(),
        })?;
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        return Err(LoadError::ToolFailed {
            program: tool.program.clone(),
            commit: what.to_string(),
            status: output.status.to_string(),
            stderr: stderr.chars().take(400).collect(),
        });
    }
    Ok(String::from_utf8_lossy(&output.stdout).into_owned())
}

/// Loads the migration commits of a service. Each commit's parent is the
/// previous migration commit, the first one's is the pre-migration ref.
pub fn load_service_commits(record: &ServiceRecord, tool: &VcsTool) -> Result<Vec<CommitDiff>, LoadError> {
    record.validate()?;
    let unreadable = |reason: String| LoadError::UnreadableSource {
        path: record.source.clone(),
        reason,
    };
    if !record.source.is_dir() {
        return Err(unreadable("not a directory".into()));
    }
    let texts: Vec<(String, String)> = match record.kind {
        SourceKind::Patches => {
            let wanted: HashSet<&str> = record.migration_commits.iter().map(String::as_str).collect();
            let mut by_name: BTreeMap<String, (String, PathBuf)> = BTreeMap::new();
            for entry in fs::read_dir(&record.source).map_err(|e| unreadable(e.to_string()))? {
                let entry = entry.map_err(|e| unreadable(e.to_string()))?;
                let name = entry.file_name().to_string_lossy().into_owned();
                if let Some(caps) = PATCH_NAME.captures(&name) {
                    by_name.insert(name.clone(), (caps[1].to_string(), entry.path()));
                }
            }
            let present: HashSet<&str> = by_name.values().map(|(id, _)| id.as_str()).collect();
            if let Some(missing) = record.migration_commits.iter().find(|c| !present.contains(c.as_str())) {
                return Err(LoadError::MissingCommit(missing.clone()));
            }
            let selected: Vec<(String, PathBuf)> = by_name
                .into_values()
                .filter(|(id, _)| {
                    let keep = wanted.contains(id.as_str());
                    if !keep {
                        log::debug!("{}: skipping unlisted patch for {id}", record.service_id);
                    }
                    keep
                })
                .collect();
            selected
                .into_par_iter()
                .map(|(id, path)| {
                    let bytes = fs::read(&path).map_err(|e| LoadError::UnreadableSource {
                        path: path.clone(),
                        reason: e.to_string(),
                    })?;
                    Ok((id, String::from_utf8_lossy(&bytes).into_owned()))
                })
                .collect::<Result<_, LoadError>>()?
        }
        SourceKind::Vcs => {
            let source = record.source.to_string_lossy();
            let mut texts = Vec::with_capacity(record.migration_commits.len());
            for commit in &record.migration_commits {
                let text = run_tool(tool, &tool.diff_args, &[("source", &source), ("commit", commit)], commit)
                    .map_err(|e| match e {
                        LoadError::ToolFailed { ref stderr, .. }
                            if stderr.contains("unknown revision") || stderr.contains("bad revision") =>
                        {
                            LoadError::MissingCommit(commit.clone())
                        }
                        other => other,
                    })?;
                texts.push((commit.clone(), text));
            }
            texts
        }
    };

    let parents: Vec<String> = std::iter::once(record.pre_ref.clone())
        .chain(texts.iter().map(|(id, _)| id.clone()))
        .collect();
    texts
        .par_iter()
        .zip(parents.par_iter())
        .map(|((id, text), parent)| {
            parse_commit_patch(id, parent, text).map_err(|source| LoadError::Parse {
                commit: id.clone(),
                source,
            })
        })
        .collect()
}

/// Path → content digest listing of the pre-migration state. Only available
/// for version-control sources; patch directories yield `None`.
pub fn snapshot_manifest(record: &ServiceRecord, tool: &VcsTool) -> Result<Option<BTreeMap<String, String>>, LoadError> {
    if record.kind != SourceKind::Vcs {
        return Ok(None);
    }
    let source = record.source.to_string_lossy();
    let out = run_tool(
        tool,
        &tool.snapshot_args,
        &[("source", &source), ("ref", &record.pre_ref)],
        &record.pre_ref,
    )?;
    let mut manifest = BTreeMap::new();
    for line in out.lines() {
        if let Some((meta, path)) = line.split_once('\t') {
            if let Some(digest) = meta.split_whitespace().last() {
                manifest.insert(path.to_string(), digest.to_string());
            }
        }
    }
    Ok(Some(manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PATCH: &str = "\
From 0a1b2c Mon Sep 17 00:00:00 2001
From: Dev <dev@example.com>
Date: Mon, 1 Jan 2024 00:00:00 +0000
Subject: [PATCH] Move build script
 to Linux paths

Body line.
---
 build.sh | 2 +-

diff --git a/build.sh b/build.sh
--- a/build.sh
+++ b/build.sh
@@ -1 +1 @@
-cd C:\\build
+cd /build
";

    #[test]
    fn mail_preamble_becomes_message() {
        let c = parse_commit_patch("0a1b2c", "base", PATCH).unwrap();
        assert_eq!(c.message, "Move build script to Linux paths\n\nBody line.");
        assert_eq!(c.files.len(), 1);
    }

    #[test]
    fn plain_preamble_is_verbatim() {
        let c = parse_commit_patch("x", "y", "Fix paths\n\n--- a/f\n+++ b/f\n@@ -1 +1 @@\n-a\n+b\n").unwrap();
        assert_eq!(c.message, "Fix paths");
    }

    #[test]
    fn duplicate_file_sections_merge() {
        let text = "--- a/f\n+++ b/f\n@@ -10 +10 @@\n-a\n+b\n--- a/f\n+++ b/f\n@@ -1 +1 @@\n-c\n+d\n";
        let c = parse_commit_patch("x", "y", text).unwrap();
        assert_eq!(c.files.len(), 1);
        let starts: Vec<_> = c.files[0].hunks.iter().map(|h| h.old_start()).collect();
        assert_eq!(starts, vec![1, 10]);
    }

    fn record(dir: &std::path::Path, commits: &[&str]) -> ServiceRecord {
        ServiceRecord {
            service_id: "svc".into(),
            source: dir.to_path_buf(),
            kind: SourceKind::Patches,
            pre_ref: "base".into(),
            migration_commits: commits.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn patch_directory_in_lexical_order() {
        let dir = tempfile::tempdir().unwrap();
        for (n, id) in [(2, "bbb"), (1, "aaa"), (3, "ccc")] {
            fs::write(dir.path().join(format!("{n:04}-{id}.patch")), PATCH).unwrap();
        }
        fs::write(dir.path().join("README"), "not a patch").unwrap();
        let commits = load_service_commits(&record(dir.path(), &["ccc", "aaa", "bbb"]), &VcsTool::default()).unwrap();
        let ids: Vec<_> = commits.iter().map(|c| c.commit_id.as_str()).collect();
        assert_eq!(ids, vec!["aaa", "bbb", "ccc"]);
        assert_eq!(commits[0].parent_id, "base");
        assert_eq!(commits[2].parent_id, "bbb");
    }

    #[test]
    fn missing_commit_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("0001-aaa.patch"), PATCH).unwrap();
        let err = load_service_commits(&record(dir.path(), &["aaa", "zzz"]), &VcsTool::default()).unwrap_err();
        assert!(matches!(err, LoadError::MissingCommit(ref c) if c == "zzz"));
    }

    #[test]
    fn missing_source_is_unreadable() {
        let err = load_service_commits(&record(std::path::Path::new("/nonexistent/dir"), &["a"]), &VcsTool::default())
            .unwrap_err();
        assert!(matches!(err, LoadError::UnreadableSource { .. }));
    }

    #[test]
    fn empty_commit_list_is_invalid() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_service_commits(&record(dir.path(), &[]), &VcsTool::default()),
            Err(LoadError::InvalidRecord(_))
        ));
    }

    #[test]
    fn placeholders_substitute() {
        let t = vec!["-C".to_string(), "{source}".into(), "show".into(), "{commit}".into()];
        assert_eq!(
            substitute(&t, &[("source", "/r"), ("commit", "abc")]),
            vec!["-C", "/r", "show", "abc"]
        );
    }
}
