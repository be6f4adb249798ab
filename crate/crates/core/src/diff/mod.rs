//! Change units: commits, file diffs, hunks and line edits.
//!
//! Everything here is immutable once built. [`Hunk`] computes its id at
//! construction and keeps its fields private so the id can never drift from
//! the content it was derived from.

mod load;
mod myers;
mod parse;
mod render;
mod snapshot;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::FieldHasher;

pub use load::{load_service_commits, parse_commit_patch, snapshot_manifest, LoadError, ServiceRecord, SourceKind, VcsTool};
pub use myers::{apply_hunks, compute_file_diff, diff_texts, edit_script, ApplyError, EditOp};
pub use parse::{parse_unified_diff, ParseError};
pub use render::render_unified_diff;
pub use snapshot::{diff_snapshots, SnapshotError};

/// Placeholder path used by unified diffs for the missing side of an added
/// or deleted file.
pub const DEV_NULL: &str = "/dev/null";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LineKind {
    Ctx,
    Add,
    Del,
}

impl LineKind {
    pub fn prefix(self) -> char {
        match self {
            LineKind::Ctx => ' ',
            LineKind::Add => '+',
            LineKind::Del => '-',
        }
    }

    pub fn from_prefix(c: char) -> Option<Self> {
        match c {
            ' ' => Some(LineKind::Ctx),
            '+' => Some(LineKind::Add),
            '-' => Some(LineKind::Del),
            _ => None,
        }
    }
}

/// One line of a hunk body. `no_newline` marks a line followed by the
/// `\ No newline at end of file` marker.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HunkLine {
    pub kind: LineKind,
    pub content: String,
    pub no_newline: bool,
}

impl HunkLine {
    pub fn new(kind: LineKind, content: impl Into<String>) -> Self {
        Self {
            kind,
            content: content.into(),
            no_newline: false,
        }
    }

    pub fn ctx(content: impl Into<String>) -> Self {
        Self::new(LineKind::Ctx, content)
    }

    pub fn add(content: impl Into<String>) -> Self {
        Self::new(LineKind::Add, content)
    }

    pub fn del(content: impl Into<String>) -> Self {
        Self::new(LineKind::Del, content)
    }

    pub fn is_change(&self) -> bool {
        self.kind != LineKind::Ctx
    }
}

/// Stable content digest of a hunk.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HunkId(String);

impl HunkId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for HunkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("hunk @@ -{old_start},{expected_old} +{new_start},{expected_new} @@ has {actual_old} old-side and {actual_new} new-side lines")]
pub struct CountMismatch {
    pub old_start: u32,
    pub new_start: u32,
    pub expected_old: u32,
    pub expected_new: u32,
    pub actual_old: u32,
    pub actual_new: u32,
}

/// A contiguous block of a unified diff.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hunk {
    file_old: String,
    file_new: String,
    old_start: u32,
    old_len: u32,
    new_start: u32,
    new_len: u32,
    lines: Vec<HunkLine>,
    id: HunkId,
}

impl Hunk {
    /// Builds a hunk, deriving both lengths from `lines`.
    pub fn new(
        file_old: impl Into<String>,
        file_new: impl Into<String>,
        old_start: u32,
        new_start: u32,
        lines: Vec<HunkLine>,
    ) -> Self {
        let (old_len, new_len) = side_counts(&lines);
        let file_old = file_old.into();
        let file_new = file_new.into();
        let id = hunk_id(&file_old, &file_new, old_start, new_start, &lines);
        Self {
            file_old,
            file_new,
            old_start,
            old_len,
            new_start,
            new_len,
            lines,
            id,
        }
    }

    /// Builds a hunk from a header with declared counts, failing when the
    /// body disagrees with them.
    pub fn with_counts(
        file_old: impl Into<String>,
        file_new: impl Into<String>,
        (old_start, old_len): (u32, u32),
        (new_start, new_len): (u32, u32),
        lines: Vec<HunkLine>,
    ) -> Result<Self, CountMismatch> {
        let (actual_old, actual_new) = side_counts(&lines);
        if actual_old != old_len || actual_new != new_len {
            return Err(CountMismatch {
                old_start,
                new_start,
                expected_old: old_len,
                expected_new: new_len,
                actual_old,
                actual_new,
            });
        }
        Ok(Self::new(file_old, file_new, old_start, new_start, lines))
    }

    pub fn file_old(&self) -> &str {
        &self.file_old
    }

    pub fn file_new(&self) -> &str {
        &self.file_new
    }

    /// Path used for file gating and reporting: the post-image path, or the
    /// pre-image path for pure deletions.
    pub fn path(&self) -> &str {
        if self.file_new == DEV_NULL {
            &self.file_old
        } else {
            &self.file_new
        }
    }

    pub fn old_start(&self) -> u32 {
        self.old_start
    }

    pub fn old_len(&self) -> u32 {
        self.old_len
    }

    pub fn new_start(&self) -> u32 {
        self.new_start
    }

    pub fn new_len(&self) -> u32 {
        self.new_len
    }

    pub fn lines(&self) -> &[HunkLine] {
        &self.lines
    }

    pub fn id(&self) -> &HunkId {
        &self.id
    }

    /// ADD and DEL lines with their index in the hunk body.
    pub fn changed_lines(&self) -> impl Iterator<Item = (usize, &HunkLine)> {
        self.lines.iter().enumerate().filter(|(_, l)| l.is_change())
    }

    pub fn count(&self, kind: LineKind) -> usize {
        self.lines.iter().filter(|l| l.kind == kind).count()
    }

    /// One [`LineEdit`] per ADD/DEL line, anchored by walking the hunk's
    /// line counters.
    pub fn line_edits(&self) -> Vec<LineEdit> {
        let mut old_line = self.old_start;
        let mut new_line = self.new_start;
        let mut edits = Vec::new();
        for line in &self.lines {
            match line.kind {
                LineKind::Ctx => {
                    old_line += 1;
                    new_line += 1;
                }
                LineKind::Del => {
                    edits.push(LineEdit {
                        file: self.file_old.clone(),
                        op: EditKind::Del,
                        content: line.content.clone(),
                        anchor: old_line.max(1),
                    });
                    old_line += 1;
                }
                LineKind::Add => {
                    edits.push(LineEdit {
                        file: self.file_new.clone(),
                        op: EditKind::Add,
                        content: line.content.clone(),
                        anchor: new_line.max(1),
                    });
                    new_line += 1;
                }
            }
        }
        edits
    }
}

fn side_counts(lines: &[HunkLine]) -> (u32, u32) {
    let mut old = 0;
    let mut new = 0;
    for l in lines {
        match l.kind {
            LineKind::Ctx => {
                old += 1;
                new += 1;
            }
            LineKind::Del => old += 1,
            LineKind::Add => new += 1,
        }
    }
    (old, new)
}

fn hunk_id(file_old: &str, file_new: &str, old_start: u32, new_start: u32, lines: &[HunkLine]) -> HunkId {
    let mut h = FieldHasher::new();
    h.field(file_old)
        .field(file_new)
        .field(old_start.to_le_bytes())
        .field(new_start.to_le_bytes());
    for l in lines {
        let mut tag = [l.kind.prefix() as u8, l.no_newline as u8];
        tag[1] += b'0';
        h.field(tag).field(&l.content);
    }
    HunkId(h.finish_short(16))
}

/// Converts hunks into metric units.
pub fn extract_line_edits(hunk: &Hunk) -> Vec<LineEdit> {
    hunk.line_edits()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EditKind {
    Add,
    Del,
}

/// A single added or deleted line. `anchor` is 1-based: post-image line for
/// ADD, pre-image line for DEL.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LineEdit {
    pub file: String,
    pub op: EditKind,
    pub content: String,
    pub anchor: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FileStatus {
    Added,
    Deleted,
    Modified,
    Renamed,
}

/// All hunks for one file within a patch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileDiff {
    pub old_path: String,
    pub new_path: String,
    pub status: FileStatus,
    /// Set when the patch only declared a binary change; such diffs carry no
    /// hunks and are ignored by mapping and metrics.
    pub binary: bool,
    pub hunks: Vec<Hunk>,
}

impl FileDiff {
    /// Path used for gating/reporting, see [`Hunk::path`].
    pub fn path(&self) -> &str {
        if self.status == FileStatus::Deleted {
            &self.old_path
        } else {
            &self.new_path
        }
    }

    pub fn is_text(&self) -> bool {
        !self.binary
    }

    /// Checks the status/content invariants.
    pub fn check(&self) -> Result<(), String> {
        let all = |kind: LineKind| self.hunks.iter().flat_map(|h| h.lines()).all(|l| l.kind == kind);
        match self.status {
            FileStatus::Added if !all(LineKind::Add) => {
                Err(format!("{}: added file has non-ADD lines", self.new_path))
            }
            FileStatus::Deleted if !all(LineKind::Del) => {
                Err(format!("{}: deleted file has non-DEL lines", self.old_path))
            }
            FileStatus::Renamed if self.old_path == self.new_path => {
                Err(format!("{}: rename with identical paths", self.old_path))
            }
            _ => Ok(()),
        }
    }
}

/// One commit's worth of file diffs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitDiff {
    pub commit_id: String,
    pub parent_id: String,
    pub message: String,
    pub files: Vec<FileDiff>,
}

impl CommitDiff {
    /// Text hunks in file order.
    pub fn hunks(&self) -> impl Iterator<Item = &Hunk> {
        self.files.iter().filter(|f| f.is_text()).flat_map(|f| f.hunks.iter())
    }
}
