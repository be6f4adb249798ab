//! The `.kb.md` document format.
//!
//! ```text
//! ---
//! id: win-path-separators
//! title: Convert Windows paths in scripts
//! file_globs: ["**/*.sh", "**/*.ps1"]
//! keywords:
//!   - C:\
//! patterns: []
//! positive_examples:
//!   - cd C:\build\scripts
//! negative_examples:
//!   - cd /home/build
//! ---
//!
//! Free-text description of the sub-task.
//!
//! ## Pattern Descriptions
//!
//! - Windows drive names
//! ```
//!
//! Values may be single- or double-quoted; quoted values are taken verbatim
//! (no escape processing), which keeps regex backslashes intact.

use std::sync::LazyLock;

use regex::Regex;

use super::{KbDoc, KbError, SourceMap};
use crate::digest::sha256_hex;
use crate::glob;

static SLUG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[a-z0-9-]+$").unwrap());
static KEY_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^([A-Za-z_][A-Za-z0-9_]*):(.*)$").unwrap());

const LIST_FIELDS: &[&str] = &[
    "file_globs",
    "keywords",
    "patterns",
    "positive_examples",
    "negative_examples",
];
const SCALAR_FIELDS: &[&str] = &["id", "title"];
pub(crate) const MIN_KEYWORD_LEN: usize = 3;

/// Normal form used for version hashing: LF endings, no trailing
/// whitespace, blank-line runs collapsed, no leading/trailing blank lines.
pub fn canonicalize(text: &str) -> String {
    let normalized = text.replace("\r\n", "\n").replace('\r', "\n");
    let mut out: Vec<&str> = Vec::new();
    for line in normalized.split('\n') {
        let line = line.trim_end();
        if line.is_empty() && out.last().is_none_or(|l| l.is_empty()) {
            continue;
        }
        out.push(line);
    }
    while out.last() == Some(&"") {
        out.pop();
    }
    let mut s = out.join("\n");
    if !s.is_empty() {
        s.push('\n');
    }
    s
}

fn unquote(raw: &str) -> String {
    let t = raw.trim();
    for q in ['"', '\''] {
        if t.len() >= 2 && t.starts_with(q) && t.ends_with(q) {
            return t[1..t.len() - 1].to_string();
        }
    }
    t.to_string()
}

/// Splits `[a, "b,c", [x]]` on top-level commas.
fn split_inline_list(inner: &str, line: usize) -> Result<Vec<String>, KbError> {
    let mut items = Vec::new();
    let mut current = String::new();
    let mut quote: Option<char> = None;
    let mut depth = 0i32;
    for c in inner.chars() {
        match quote {
            Some(q) => {
                current.push(c);
                if c == q {
                    quote = None;
                }
            }
            None => match c {
                '"' | '\'' if current.trim().is_empty() => {
                    quote = Some(c);
                    current.push(c);
                }
                '[' | '(' | '{' => {
                    depth += 1;
                    current.push(c);
                }
                ']' | ')' | '}' => {
                    depth -= 1;
                    current.push(c);
                }
                ',' if depth == 0 => {
                    items.push(std::mem::take(&mut current));
                }
                _ => current.push(c),
            },
        }
    }
    if quote.is_some() {
        return Err(KbError::Syntax { line, reason: "unterminated quote in list".into() });
    }
    if !current.trim().is_empty() || !items.is_empty() {
        items.push(current);
    }
    let items: Vec<String> = items.iter().map(|s| unquote(s)).collect();
    if items.iter().any(|s| s.is_empty()) {
        return Err(KbError::Syntax { line, reason: "empty list item".into() });
    }
    Ok(items)
}

#[derive(Default)]
struct Fields {
    id: Option<(String, usize)>,
    title: Option<(String, usize)>,
    lists: Vec<(&'static str, Vec<(String, usize)>)>,
}

impl Fields {
    fn list(&self, name: &str) -> Vec<(String, usize)> {
        self.lists
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v.clone())
            .unwrap_or_default()
    }
}

fn parse_front_matter(lines: &[(usize, &str)]) -> Result<Fields, KbError> {
    let mut fields = Fields::default();
    let mut open_list: Option<&'static str> = None;
    for &(no, raw) in lines {
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(item) = trimmed.strip_prefix("- ").or_else(|| (trimmed == "-").then_some("")) {
            let Some(key) = open_list else {
                return Err(KbError::Syntax { line: no, reason: "list item outside a list field".into() });
            };
            let value = unquote(item);
            if value.is_empty() {
                return Err(KbError::Syntax { line: no, reason: "empty list item".into() });
            }
            let entry = fields.lists.iter_mut().find(|(n, _)| *n == key).expect("open list registered");
            entry.1.push((value, no));
            continue;
        }
        let caps = KEY_LINE.captures(raw).ok_or_else(|| KbError::Syntax {
            line: no,
            reason: format!("expected `key: value`, found `{trimmed}`"),
        })?;
        let key = caps.get(1).map_or("", |m| m.as_str());
        let value = caps.get(2).map_or("", |m| m.as_str()).trim();
        open_list = None;
        if let Some(&name) = SCALAR_FIELDS.iter().find(|f| **f == key) {
            if value.starts_with('[') {
                return Err(KbError::Syntax { line: no, reason: format!("`{name}` takes a single value") });
            }
            let v = Some((unquote(value), no));
            if name == "id" {
                fields.id = v;
            } else {
                fields.title = v;
            }
        } else if let Some(&name) = LIST_FIELDS.iter().find(|f| **f == key) {
            if fields.lists.iter().any(|(n, _)| *n == name) {
                return Err(KbError::Syntax { line: no, reason: format!("`{name}` given twice") });
            }
            let items = if value.is_empty() {
                open_list = Some(name);
                Vec::new()
            } else if let Some(inner) = value.strip_prefix('[') {
                let inner = inner.strip_suffix(']').ok_or_else(|| KbError::Syntax {
                    line: no,
                    reason: "inline list must close on the same line".into(),
                })?;
                split_inline_list(inner, no)?.into_iter().map(|v| (v, no)).collect()
            } else {
                vec![(unquote(value), no)]
            };
            fields.lists.push((name, items));
        } else {
            return Err(KbError::UnknownField { key: key.to_string(), line: no });
        }
    }
    Ok(fields)
}

fn is_pattern_heading(line: &str) -> bool {
    line.strip_prefix("##")
        .map(|rest| rest.trim_start_matches('#').trim().eq_ignore_ascii_case("pattern descriptions"))
        .unwrap_or(false)
}

/// Parses one KB document.
pub fn parse_kb_document(text: &str) -> Result<KbDoc, KbError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .collect();
    let open = lines
        .iter()
        .position(|(_, l)| !l.trim().is_empty())
        .filter(|&i| lines[i].1.trim_end() == "---")
        .ok_or(KbError::MissingFrontMatter)?;
    let close = lines[open + 1..]
        .iter()
        .position(|(_, l)| l.trim_end() == "---")
        .map(|i| i + open + 1)
        .ok_or(KbError::MissingFrontMatter)?;

    let fields = parse_front_matter(&lines[open + 1..close])?;

    let mut description_lines: Vec<&str> = Vec::new();
    let mut description_line = 0;
    let mut pattern_descriptions: Vec<(String, usize)> = Vec::new();
    let mut in_patterns = false;
    for &(no, raw) in &lines[close + 1..] {
        let trimmed = raw.trim();
        if trimmed.starts_with('#') {
            in_patterns = is_pattern_heading(trimmed);
            if in_patterns {
                continue;
            }
        }
        if in_patterns {
            if let Some(item) = trimmed.strip_prefix("- ").or_else(|| trimmed.strip_prefix("* ")) {
                pattern_descriptions.push((item.trim().to_string(), no));
            } else if !trimmed.is_empty() {
                match pattern_descriptions.last_mut() {
                    Some((d, _)) => {
                        d.push(' ');
                        d.push_str(trimmed);
                    }
                    None => return Err(KbError::Syntax { line: no, reason: "expected a `- ` bullet".into() }),
                }
            }
            continue;
        }
        if description_line == 0 && !trimmed.is_empty() {
            description_line = no;
        }
        description_lines.push(raw.trim_end());
    }
    let description = canonicalize(&description_lines.join("\n")).trim_end().to_string();

    let (id, id_line) = fields.id.clone().ok_or(KbError::MissingField { field: "id" })?;
    if !SLUG.is_match(&id) {
        return Err(KbError::BadId { id, line: id_line });
    }
    let (title, title_line) = fields.title.clone().ok_or(KbError::MissingField { field: "title" })?;
    if title.trim().is_empty() {
        return Err(KbError::MissingField { field: "title" });
    }

    let keywords = fields.list("keywords");
    for (kw, line) in &keywords {
        if kw.trim().chars().count() < MIN_KEYWORD_LEN {
            return Err(KbError::ShortKeyword { keyword: kw.clone(), line: *line });
        }
    }
    let patterns = fields.list("patterns");
    for (p, line) in &patterns {
        if let Err(e) = Regex::new(p) {
            return Err(KbError::BadRegex {
                pattern: p.clone(),
                line: *line,
                reason: e.to_string(),
            });
        }
    }
    let globs = fields.list("file_globs");
    for (g, line) in &globs {
        if let Err(e) = glob::validate(g) {
            return Err(KbError::BadGlob { glob: g.clone(), line: *line, reason: e.reason });
        }
    }
    if keywords.is_empty() && patterns.is_empty() && pattern_descriptions.is_empty() {
        return Err(KbError::NoMatchers { id });
    }

    let split = |v: Vec<(String, usize)>| -> (Vec<String>, Vec<usize>) { v.into_iter().unzip() };
    let (keywords, keyword_lines) = split(keywords);
    let (patterns, pattern_lines) = split(patterns);
    let (file_globs, glob_lines) = split(globs);
    let (pattern_descriptions, description_item_lines) = split(pattern_descriptions);
    let (positive_examples, _) = split(fields.list("positive_examples"));
    let (negative_examples, _) = split(fields.list("negative_examples"));

    Ok(KbDoc {
        id,
        title,
        description,
        file_globs,
        keywords,
        pattern_descriptions,
        patterns,
        positive_examples,
        negative_examples,
        version: sha256_hex(canonicalize(text)),
        source: None,
        locations: SourceMap {
            id: id_line,
            title: title_line,
            description: description_line.max(close + 1),
            file_globs: glob_lines,
            keywords: keyword_lines,
            patterns: pattern_lines,
            pattern_descriptions: description_item_lines,
        },
    })
}
