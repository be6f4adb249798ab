use std::fmt::Write;

use super::{FileDiff, FileStatus, Hunk, DEV_NULL};

const NO_NEWLINE: &str = "\\ No newline at end of file";

/// Canonical unified-diff bytes for `files`: git-style headers in the given
/// file order, hunks in ascending `old_start`, LF line endings.
pub fn render_unified_diff(files: &[FileDiff]) -> String {
    let mut out = String::new();
    for f in files {
        render_file(&mut out, f);
    }
    out
}

fn side(prefix: &str, path: &str) -> String {
    if path == DEV_NULL {
        DEV_NULL.to_string()
    } else {
        format!("{prefix}{path}")
    }
}

fn render_file(out: &mut String, f: &FileDiff) {
    let (git_old, git_new) = match f.status {
        FileStatus::Added => (&f.new_path, &f.new_path),
        FileStatus::Deleted => (&f.old_path, &f.old_path),
        _ => (&f.old_path, &f.new_path),
    };
    let _ = writeln!(out, "diff --git a/{git_old} b/{git_new}");
    match f.status {
        FileStatus::Added => out.push_str("new file mode 100644\n"),
        FileStatus::Deleted => out.push_str("deleted file mode 100644\n"),
        FileStatus::Renamed => {
            let _ = writeln!(out, "rename from {}\nrename to {}", f.old_path, f.new_path);
        }
        FileStatus::Modified => {}
    }
    if f.binary {
        let _ = writeln!(
            out,
            "Binary files {} and {} differ",
            side("a/", &f.old_path),
            side("b/", &f.new_path)
        );
        return;
    }
    if f.hunks.is_empty() {
        return;
    }
    let _ = writeln!(out, "--- {}", side("a/", &f.old_path));
    let _ = writeln!(out, "+++ {}", side("b/", &f.new_path));
    let mut hunks: Vec<&Hunk> = f.hunks.iter().collect();
    hunks.sort_by_key(|h| h.old_start());
    for h in hunks {
        render_hunk(out, h);
    }
}

fn range(start: u32, len: u32) -> String {
    if len == 1 {
        start.to_string()
    } else {
        format!("{start},{len}")
    }
}

pub(crate) fn render_hunk(out: &mut String, h: &Hunk) {
    let _ = writeln!(
        out,
        "@@ -{} +{} @@",
        range(h.old_start(), h.old_len()),
        range(h.new_start(), h.new_len())
    );
    for l in h.lines() {
        out.push(l.kind.prefix());
        out.push_str(&l.content);
        out.push('\n');
        if l.no_newline {
            out.push_str(NO_NEWLINE);
            out.push('\n');
        }
    }
}
