use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use super::{CountMismatch, FileDiff, FileStatus, Hunk, HunkLine, LineKind, DEV_NULL};

static HUNK_HEADER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@").unwrap());

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: malformed hunk header")]
    MalformedHunkHeader { line: usize },
    #[error("line {line}: {source}")]
    CountMismatch {
        line: usize,
        #[source]
        source: CountMismatch,
    },
    #[error("line {line}: patch ends in the middle of a file header")]
    TruncatedPatch { line: usize },
    #[error("line {line}: {reason}")]
    InvalidFileDiff { line: usize, reason: String },
}

/// Parses a unified diff (plain GNU or git-flavoured) into file diffs.
pub fn parse_unified_diff(text: &str) -> Result<Vec<FileDiff>, ParseError> {
    parse_with_preamble(text).map(|(_, files)| files)
}

/// Same as [`parse_unified_diff`], also returning the lines that precede the
/// first file header (commit message, mail headers, diffstat).
pub(crate) fn parse_with_preamble(text: &str) -> Result<(Vec<&str>, Vec<FileDiff>), ParseError> {
    let mut p = Parser { lines: split_lines(text), pos: 0 };
    let mut preamble = Vec::new();
    while !p.eof() && !p.at_file_start() {
        preamble.push(p.lines[p.pos]);
        p.pos += 1;
    }
    let files = p.files()?;
    Ok((preamble, files))
}

fn split_lines(text: &str) -> Vec<&str> {
    let mut lines: Vec<&str> = text.split('\n').collect();
    if lines.last() == Some(&"") {
        lines.pop();
    }
    lines
}

struct Parser<'t> {
    lines: Vec<&'t str>,
    pos: usize,
}

#[derive(Default)]
struct GitHeader {
    old: Option<String>,
    new: Option<String>,
    status: Option<FileStatus>,
}

impl<'t> Parser<'t> {
    fn eof(&self) -> bool {
        self.pos >= self.lines.len()
    }

    fn peek(&self) -> Option<&'t str> {
        self.lines.get(self.pos).copied()
    }

    fn line_no(&self) -> usize {
        self.pos + 1
    }

    fn at_plain_header(&self) -> bool {
        matches!(
            (self.lines.get(self.pos), self.lines.get(self.pos + 1)),
            (Some(a), Some(b)) if a.starts_with("--- ") && b.starts_with("+++ ")
        )
    }

    fn at_file_start(&self) -> bool {
        match self.peek() {
            Some(l) if l.starts_with("diff --git ") => true,
            Some(l) if l.starts_with("Binary files ") => true,
            Some(_) => self.at_plain_header(),
            None => false,
        }
    }

    fn files(&mut self) -> Result<Vec<FileDiff>, ParseError> {
        let mut files = Vec::new();
        while let Some(line) = self.peek() {
            let start = self.line_no();
            let file = if line.starts_with("diff --git ") {
                self.git_file()?
            } else if self.at_plain_header() {
                self.plain_file(GitHeader::default())?
            } else if line.starts_with("Binary files ") {
                self.pos += 1;
                binary_line_file(line, GitHeader::default())
            } else if line == "-- " {
                // mail signature trailer
                break;
            } else if line.starts_with("@@") {
                return Err(ParseError::MalformedHunkHeader { line: start });
            } else {
                self.pos += 1;
                continue;
            };
            file.check()
                .map_err(|reason| ParseError::InvalidFileDiff { line: start, reason })?;
            files.push(file);
        }
        Ok(files)
    }

    fn git_file(&mut self) -> Result<FileDiff, ParseError> {
        let header_line = self.peek().unwrap_or_default();
        let mut header = GitHeader::default();
        if let Some((old, new)) = split_git_names(&header_line["diff --git ".len()..]) {
            header.old = Some(old);
            header.new = Some(new);
        }
        self.pos += 1;
        while let Some(line) = self.peek() {
            if line.starts_with("diff --git ") || line.starts_with("@@") || self.at_plain_header() {
                break;
            }
            if line.starts_with("--- ") {
                return Err(ParseError::TruncatedPatch { line: self.line_no() });
            }
            if line.starts_with("Binary files ") || line == "GIT binary patch" {
                self.pos += 1;
                if line == "GIT binary patch" {
                    while let Some(l) = self.peek() {
                        if l.starts_with("diff --git ") {
                            break;
                        }
                        self.pos += 1;
                    }
                }
                return Ok(binary_line_file(line, header));
            }
            if line.starts_with("new file mode") {
                header.status = Some(FileStatus::Added);
            } else if line.starts_with("deleted file mode") {
                header.status = Some(FileStatus::Deleted);
            } else if let Some(p) = line.strip_prefix("rename from ") {
                header.old = Some(clean_path(p, false));
                header.status = Some(FileStatus::Renamed);
            } else if let Some(p) = line.strip_prefix("rename to ") {
                header.new = Some(clean_path(p, false));
                header.status = Some(FileStatus::Renamed);
            } else if !is_extended_header(line) {
                break;
            }
            self.pos += 1;
        }
        if self.at_plain_header() {
            return self.plain_file(header);
        }
        if matches!(self.peek(), Some(l) if l.starts_with("@@")) {
            return Err(ParseError::MalformedHunkHeader { line: self.line_no() });
        }
        let status = header.status.unwrap_or(FileStatus::Modified);
        let (old_path, new_path) = match (header.old, header.new) {
            (Some(o), Some(n)) => (o, n),
            _ => return Err(ParseError::TruncatedPatch { line: self.line_no() }),
        };
        let (old_path, new_path) = match status {
            FileStatus::Added => (DEV_NULL.to_string(), new_path),
            FileStatus::Deleted => (old_path, DEV_NULL.to_string()),
            _ => (old_path, new_path),
        };
        Ok(FileDiff { old_path, new_path, status, binary: false, hunks: Vec::new() })
    }

    fn plain_file(&mut self, header: GitHeader) -> Result<FileDiff, ParseError> {
        let old_line = self.lines[self.pos];
        let new_line = self.lines[self.pos + 1];
        self.pos += 2;
        let old_path = clean_path(&old_line[4..], true);
        let new_path = clean_path(&new_line[4..], true);
        let status = if old_path == DEV_NULL {
            FileStatus::Added
        } else if new_path == DEV_NULL {
            FileStatus::Deleted
        } else if header.status == Some(FileStatus::Renamed) {
            FileStatus::Renamed
        } else {
            FileStatus::Modified
        };
        if !matches!(self.peek(), Some(l) if l.starts_with("@@")) {
            return Err(ParseError::TruncatedPatch { line: self.line_no() });
        }
        let mut hunks = Vec::new();
        while matches!(self.peek(), Some(l) if l.starts_with("@@")) {
            hunks.push(self.hunk(&old_path, &new_path)?);
        }
        Ok(FileDiff { old_path, new_path, status, binary: false, hunks })
    }

    fn hunk(&mut self, old_path: &str, new_path: &str) -> Result<Hunk, ParseError> {
        let header_no = self.line_no();
        let header = self.lines[self.pos];
        let caps = HUNK_HEADER
            .captures(header)
            .ok_or(ParseError::MalformedHunkHeader { line: header_no })?;
        let num = |i: usize, default: u32| -> Result<u32, ParseError> {
            caps.get(i)
                .map_or(Ok(default), |m| m.as_str().parse())
                .map_err(|_| ParseError::MalformedHunkHeader { line: header_no })
        };
        let (old_start, old_len) = (num(1, 0)?, num(2, 1)?);
        let (new_start, new_len) = (num(3, 0)?, num(4, 1)?);
        self.pos += 1;

        let mut body: Vec<HunkLine> = Vec::new();
        let (mut seen_old, mut seen_new) = (0u32, 0u32);
        let mismatch = |seen_old, seen_new| ParseError::CountMismatch {
            line: header_no,
            source: CountMismatch {
                old_start,
                new_start,
                expected_old: old_len,
                expected_new: new_len,
                actual_old: seen_old,
                actual_new: seen_new,
            },
        };
        while seen_old < old_len || seen_new < new_len {
            let Some(line) = self.peek() else {
                return Err(mismatch(seen_old, seen_new));
            };
            if line.starts_with('\\') {
                if let Some(last) = body.last_mut() {
                    last.no_newline = true;
                }
                self.pos += 1;
                continue;
            }
            let (kind, content) = match line.chars().next() {
                None => (LineKind::Ctx, ""),
                Some(c) => match LineKind::from_prefix(c) {
                    Some(kind) => (kind, &line[1..]),
                    None => return Err(mismatch(seen_old, seen_new)),
                },
            };
            match kind {
                LineKind::Ctx => {
                    seen_old += 1;
                    seen_new += 1;
                }
                LineKind::Del => seen_old += 1,
                LineKind::Add => seen_new += 1,
            }
            if seen_old > old_len || seen_new > new_len {
                return Err(mismatch(seen_old, seen_new));
            }
            body.push(HunkLine::new(kind, content));
            self.pos += 1;
        }
        if matches!(self.peek(), Some(l) if l.starts_with('\\')) {
            if let Some(last) = body.last_mut() {
                last.no_newline = true;
            }
            self.pos += 1;
        }
        // Body-looking lines right after a complete hunk mean the header
        // under-counted.
        let mut extra_old = 0;
        let mut extra_new = 0;
        let mut probe = self.pos;
        while let Some(l) = self.lines.get(probe) {
            let header_pair = l.starts_with("--- ")
                && self.lines.get(probe + 1).is_some_and(|n| n.starts_with("+++ "));
            if header_pair || *l == "-- " {
                break;
            }
            match l.chars().next().and_then(LineKind::from_prefix) {
                Some(LineKind::Ctx) => {
                    extra_old += 1;
                    extra_new += 1;
                }
                Some(LineKind::Del) => extra_old += 1,
                Some(LineKind::Add) => extra_new += 1,
                None => break,
            }
            probe += 1;
        }
        if extra_old + extra_new > 0 {
            return Err(mismatch(seen_old + extra_old, seen_new + extra_new));
        }
        Hunk::with_counts(old_path, new_path, (old_start, old_len), (new_start, new_len), body)
            .map_err(|source| ParseError::CountMismatch { line: header_no, source })
    }
}

fn is_extended_header(line: &str) -> bool {
    const PREFIXES: &[&str] = &[
        "index ",
        "old mode ",
        "new mode ",
        "similarity index ",
        "dissimilarity index ",
        "copy from ",
        "copy to ",
    ];
    PREFIXES.iter().any(|p| line.starts_with(p))
}

/// Strips timestamps, quoting and the conventional `a/` / `b/` prefixes.
fn clean_path(raw: &str, strip_prefix: bool) -> String {
    let raw = raw.split('\t').next().unwrap_or(raw).trim_end();
    let raw = raw
        .strip_prefix('"')
        .and_then(|r| r.strip_suffix('"'))
        .unwrap_or(raw);
    if raw == DEV_NULL {
        return raw.to_string();
    }
    if strip_prefix {
        if let Some(rest) = raw.strip_prefix("a/").or_else(|| raw.strip_prefix("b/")) {
            return rest.to_string();
        }
    }
    raw.to_string()
}

fn split_git_names(rest: &str) -> Option<(String, String)> {
    let rest = rest.strip_prefix("a/")?;
    // Identical names are the common case and resolve paths containing " b/".
    let half = rest.len().checked_sub(3)? / 2;
    if rest.len() % 2 == 1 && rest.get(half..half + 3) == Some(" b/") && rest[..half] == rest[half + 3..] {
        return Some((rest[..half].to_string(), rest[half + 3..].to_string()));
    }
    let idx = rest.find(" b/")?;
    Some((rest[..idx].to_string(), rest[idx + 3..].to_string()))
}

fn binary_line_file(line: &str, header: GitHeader) -> FileDiff {
    let (mut old, mut new) = (header.old, header.new);
    if let Some(body) = line
        .strip_prefix("Binary files ")
        .and_then(|b| b.strip_suffix(" differ"))
    {
        if let Some((a, b)) = body.split_once(" and ") {
            old = Some(clean_path(a, true));
            new = Some(clean_path(b, true));
        }
    }
    let old = old.unwrap_or_else(|| DEV_NULL.to_string());
    let new = new.unwrap_or_else(|| DEV_NULL.to_string());
    let status = match header.status {
        Some(s) => s,
        None if old == DEV_NULL => FileStatus::Added,
        None if new == DEV_NULL => FileStatus::Deleted,
        None => FileStatus::Modified,
    };
    let (old_path, new_path) = match status {
        FileStatus::Added => (DEV_NULL.to_string(), new),
        FileStatus::Deleted => (old, DEV_NULL.to_string()),
        _ => (old, new),
    };
    FileDiff { old_path, new_path, status, binary: true, hunks: Vec::new() }
}
