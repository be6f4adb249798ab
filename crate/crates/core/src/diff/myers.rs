//! Shortest edit scripts (Myers, linear-space divide and conquer) and hunk
//! assembly.

use std::ops::{Index, IndexMut, Range};

use thiserror::Error;

use super::{Hunk, HunkLine, LineKind};

/// One step of an edit script. Indices are 0-based into the old/new inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    Equal { old: usize, new: usize },
    Delete { old: usize },
    Insert { new: usize },
}

// Furthest-reaching x per diagonal k; k may be negative.
struct V {
    offset: isize,
    v: Vec<usize>,
}

impl V {
    fn new(max_d: usize) -> Self {
        Self {
            offset: max_d as isize + 1,
            v: vec![0; 2 * max_d + 3],
        }
    }
}

impl Index<isize> for V {
    type Output = usize;
    fn index(&self, k: isize) -> &usize {
        &self.v[(k + self.offset) as usize]
    }
}

impl IndexMut<isize> for V {
    fn index_mut(&mut self, k: isize) -> &mut usize {
        &mut self.v[(k + self.offset) as usize]
    }
}

fn max_d(n: usize, m: usize) -> usize {
    (n + m).div_ceil(2) + 1
}

fn common_prefix<T: Eq>(a: &[T], b: &[T]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

fn common_suffix<T: Eq>(a: &[T], b: &[T]) -> usize {
    a.iter().rev().zip(b.iter().rev()).take_while(|(x, y)| x == y).count()
}

/// Returns a split point lying on an optimal path through the edit graph of
/// `old[or] x new[nr]`.
fn middle_snake<T: Eq>(
    old: &[T],
    or: Range<usize>,
    new: &[T],
    nr: Range<usize>,
    vf: &mut V,
    vb: &mut V,
) -> Option<(usize, usize)> {
    let n = or.len();
    let m = nr.len();
    let delta = n as isize - m as isize;
    let odd = delta & 1 == 1;
    vf[1] = 0;
    vb[1] = 0;
    let d_max = max_d(n, m) as isize;
    for d in 0..d_max {
        let mut k = d;
        while k >= -d {
            let mut x = if k == -d || (k != d && vf[k - 1] < vf[k + 1]) {
                vf[k + 1]
            } else {
                vf[k - 1] + 1
            };
            let y = (x as isize - k) as usize;
            let (x0, y0) = (x, y);
            if x < n && y < m {
                x += common_prefix(&old[or.start + x..or.end], &new[nr.start + y..nr.end]);
            }
            vf[k] = x;
            if odd && (k - delta).abs() < d && vf[k] + vb[-(k - delta)] >= n {
                return Some((or.start + x0, nr.start + y0));
            }
            k -= 2;
        }
        let mut k = d;
        while k >= -d {
            let mut x = if k == -d || (k != d && vb[k - 1] < vb[k + 1]) {
                vb[k + 1]
            } else {
                vb[k - 1] + 1
            };
            let mut y = (x as isize - k) as usize;
            if x < n && y < m {
                let adv = common_suffix(
                    &old[or.start..or.start + n - x],
                    &new[nr.start..nr.start + m - y],
                );
                x += adv;
                y += adv;
            }
            vb[k] = x;
            if !odd && (k - delta).abs() <= d && vb[k] + vf[-(k - delta)] >= n {
                return Some((or.start + n - x, nr.start + m - y));
            }
            k -= 2;
        }
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn conquer<T: Eq>(
    old: &[T],
    mut or: Range<usize>,
    new: &[T],
    mut nr: Range<usize>,
    vf: &mut V,
    vb: &mut V,
    out: &mut Vec<EditOp>,
) {
    let pre = common_prefix(&old[or.clone()], &new[nr.clone()]);
    for i in 0..pre {
        out.push(EditOp::Equal { old: or.start + i, new: nr.start + i });
    }
    or.start += pre;
    nr.start += pre;
    let suf = common_suffix(&old[or.clone()], &new[nr.clone()]);
    let suffix_at = (or.end - suf, nr.end - suf);
    or.end -= suf;
    nr.end -= suf;

    if or.is_empty() && nr.is_empty() {
    } else if nr.is_empty() {
        out.extend(or.clone().map(|old| EditOp::Delete { old }));
    } else if or.is_empty() {
        out.extend(nr.clone().map(|new| EditOp::Insert { new }));
    } else if let Some((x, y)) = middle_snake(old, or.clone(), new, nr.clone(), vf, vb) {
        conquer(old, or.start..x, new, nr.start..y, vf, vb, out);
        conquer(old, x..or.end, new, y..nr.end, vf, vb, out);
    } else {
        out.extend(or.clone().map(|old| EditOp::Delete { old }));
        out.extend(nr.clone().map(|new| EditOp::Insert { new }));
    }

    for i in 0..suf {
        out.push(EditOp::Equal { old: suffix_at.0 + i, new: suffix_at.1 + i });
    }
}

/// Minimal edit script turning `old` into `new`. Within each run of changes,
/// deletions precede insertions.
pub fn edit_script<T: Eq>(old: &[T], new: &[T]) -> Vec<EditOp> {
    let d = max_d(old.len(), new.len());
    let mut vf = V::new(d);
    let mut vb = V::new(d);
    let mut raw = Vec::with_capacity(old.len() + new.len());
    conquer(old, 0..old.len(), new, 0..new.len(), &mut vf, &mut vb, &mut raw);

    let mut out = Vec::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        if matches!(raw[i], EditOp::Equal { .. }) {
            out.push(raw[i]);
            i += 1;
            continue;
        }
        let start = i;
        while i < raw.len() && !matches!(raw[i], EditOp::Equal { .. }) {
            i += 1;
        }
        let run = &raw[start..i];
        out.extend(run.iter().filter(|op| matches!(op, EditOp::Delete { .. })));
        out.extend(run.iter().filter(|op| matches!(op, EditOp::Insert { .. })));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Line<'a> {
    content: &'a str,
    no_newline: bool,
}

fn build_hunks(
    old_path: &str,
    new_path: &str,
    old: &[Line<'_>],
    new: &[Line<'_>],
    context: usize,
) -> Vec<Hunk> {
    let ops = edit_script(old, new);
    let is_change = |op: &EditOp| !matches!(op, EditOp::Equal { .. });

    // cursor positions before each op
    let mut cursors = Vec::with_capacity(ops.len() + 1);
    let (mut o, mut n) = (0usize, 0usize);
    for op in &ops {
        cursors.push((o, n));
        match op {
            EditOp::Equal { .. } => {
                o += 1;
                n += 1;
            }
            EditOp::Delete { .. } => o += 1,
            EditOp::Insert { .. } => n += 1,
        }
    }

    // group change runs whose separating context would overlap
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < ops.len() {
        if !is_change(&ops[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i < ops.len() && is_change(&ops[i]) {
            i += 1;
        }
        match groups.last_mut() {
            Some(last) if start - last.1 <= 2 * context => last.1 = i,
            _ => groups.push((start, i)),
        }
    }

    groups
        .into_iter()
        .map(|(s, e)| {
            let a = s.saturating_sub(context);
            let b = (e + context).min(ops.len());
            let (old_begin, new_begin) = cursors[a];
            let lines: Vec<HunkLine> = ops[a..b]
                .iter()
                .map(|op| match *op {
                    EditOp::Equal { old: oi, .. } => HunkLine {
                        kind: LineKind::Ctx,
                        content: old[oi].content.to_string(),
                        no_newline: old[oi].no_newline,
                    },
                    EditOp::Delete { old: oi } => HunkLine {
                        kind: LineKind::Del,
                        content: old[oi].content.to_string(),
                        no_newline: old[oi].no_newline,
                    },
                    EditOp::Insert { new: ni } => HunkLine {
                        kind: LineKind::Add,
                        content: new[ni].content.to_string(),
                        no_newline: new[ni].no_newline,
                    },
                })
                .collect();
            let old_len = lines.iter().filter(|l| l.kind != LineKind::Add).count();
            let new_len = lines.iter().filter(|l| l.kind != LineKind::Del).count();
            let old_start = if old_len == 0 { old_begin } else { old_begin + 1 };
            let new_start = if new_len == 0 { new_begin } else { new_begin + 1 };
            Hunk::new(old_path, new_path, old_start as u32, new_start as u32, lines)
        })
        .collect()
}

/// Shortest-edit-script hunks between two line sequences, with `context`
/// lines of surrounding context. Runs of edits whose context would overlap
/// share a hunk.
pub fn compute_file_diff<S: AsRef<str>>(
    old_path: &str,
    new_path: &str,
    old_lines: &[S],
    new_lines: &[S],
    context: usize,
) -> Vec<Hunk> {
    fn wrap<S: AsRef<str>>(s: &[S]) -> Vec<Line<'_>> {
        s.iter()
            .map(|l| Line { content: l.as_ref(), no_newline: false })
            .collect()
    }
    build_hunks(old_path, new_path, &wrap(old_lines), &wrap(new_lines), context)
}

fn split_text(text: &str) -> Vec<Line<'_>> {
    text.split_inclusive('\n')
        .map(|l| match l.strip_suffix('\n') {
            Some(content) => Line { content, no_newline: false },
            None => Line { content: l, no_newline: true },
        })
        .collect()
}

/// Like [`compute_file_diff`] over whole texts; a missing final newline is
/// part of a line's identity and is carried into the hunks.
pub fn diff_texts(old_path: &str, new_path: &str, old: &str, new: &str, context: usize) -> Vec<Hunk> {
    build_hunks(old_path, new_path, &split_text(old), &split_text(new), context)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApplyError {
    #[error("hunk at old line {old_start}: expected `{expected}` at line {line}, found `{found}`")]
    Mismatch {
        old_start: u32,
        line: usize,
        expected: String,
        found: String,
    },
    #[error("hunk at old line {old_start} runs past the end of the input")]
    OutOfRange { old_start: u32 },
    #[error("hunk at old line {old_start} overlaps the previous hunk")]
    Overlap { old_start: u32 },
}

/// Applies hunks (in ascending old_start order) to `old`, verifying every
/// context and deleted line.
pub fn apply_hunks<S: AsRef<str>>(old: &[S], hunks: &[Hunk]) -> Result<Vec<String>, ApplyError> {
    let mut out = Vec::with_capacity(old.len());
    let mut cursor = 0usize;
    for h in hunks {
        let begin = if h.old_len() == 0 {
            h.old_start() as usize
        } else {
            h.old_start() as usize - 1
        };
        if begin < cursor {
            return Err(ApplyError::Overlap { old_start: h.old_start() });
        }
        if begin > old.len() {
            return Err(ApplyError::OutOfRange { old_start: h.old_start() });
        }
        out.extend(old[cursor..begin].iter().map(|s| s.as_ref().to_string()));
        cursor = begin;
        for l in h.lines() {
            match l.kind {
                LineKind::Add => out.push(l.content.clone()),
                LineKind::Ctx | LineKind::Del => {
                    let found = old
                        .get(cursor)
                        .ok_or(ApplyError::OutOfRange { old_start: h.old_start() })?
                        .as_ref();
                    if found != l.content {
                        return Err(ApplyError::Mismatch {
                            old_start: h.old_start(),
                            line: cursor + 1,
                            expected: l.content.clone(),
                            found: found.to_string(),
                        });
                    }
                    if l.kind == LineKind::Ctx {
                        out.push(l.content.clone());
                    }
                    cursor += 1;
                }
            }
        }
    }
    out.extend(old[cursor..].iter().map(|s| s.as_ref().to_string()));
    Ok(out)
}
