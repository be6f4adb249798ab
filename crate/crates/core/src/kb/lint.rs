use std::fmt;
use std::path::Path;

use regex::Regex;
use serde::Serialize;

use super::KbDoc;
use crate::glob;

const STOP_LIST: &[&str] = &[
    "the", "and", "for", "file", "code", "class", "value", "data", "name", "type", "string", "path",
    "test", "line", "true", "false", "null", "return", "public", "private", "new", "var", "let",
    "set", "get", "config", "error", "main", "default", "todo", "this", "that", "with", "from",
];

const SOURCE_EXTENSIONS: &[&str] = &[
    "sh", "bash", "zsh", "ps1", "psm1", "psd1", "cmd", "bat", "cs", "csproj", "fsproj", "vbproj",
    "sln", "props", "targets", "config", "json", "yaml", "yml", "xml", "toml", "ini", "env", "py",
    "java", "kt", "kts", "gradle", "go", "rs", "js", "mjs", "ts", "jsx", "tsx", "c", "h", "cpp",
    "hpp", "cc", "fs", "vb", "rb", "php", "scala", "swift", "tf", "bicep", "proto", "sql", "md",
    "txt", "properties", "conf", "cfg", "dockerfile", "mk", "cmake", "razor", "cshtml", "resx",
];

const SPECIAL_NAMES: &[&str] = &[
    "Dockerfile",
    "Containerfile",
    "Makefile",
    "Jenkinsfile",
    "Vagrantfile",
    "Gemfile",
    "Procfile",
    "CMakeLists.txt",
    "Directory.Build.props",
    "NuGet.Config",
    "Dockerfile.linux",
    "Dockerfile.windows",
    ".dockerignore",
    ".gitlab-ci.yml",
];

const MIN_DESCRIPTION_WORDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LintCode {
    GenericKeyword,
    UnconventionalGlob,
    ShortDescription,
    EmptyMatchPattern,
}

impl LintCode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::GenericKeyword => "GENERIC_KEYWORD",
            Self::UnconventionalGlob => "UNCONVENTIONAL_GLOB",
            Self::ShortDescription => "SHORT_DESCRIPTION",
            Self::EmptyMatchPattern => "EMPTY_MATCH_PATTERN",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: LintCode,
    pub message: String,
    pub path: String,
    pub line: usize,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "WARNING",
            Severity::Error => "ERROR",
        };
        write!(f, "{sev} {} {}:{} {}", self.code.as_str(), self.path, self.line, self.message)
    }
}

fn glob_is_conventional(pattern: &str) -> bool {
    let last = pattern.rsplit('/').next().unwrap_or(pattern);
    if last == "**" {
        return true;
    }
    let hit = |candidate: &str| glob::matches(last, candidate).unwrap_or(true);
    SOURCE_EXTENSIONS.iter().any(|ext| hit(&format!("file.{ext}"))) || SPECIAL_NAMES.iter().any(|n| hit(n))
}

/// Static quality checks. Never fails; an empty list means clean.
pub fn lint_kb(doc: &KbDoc) -> Vec<Diagnostic> {
    let path = doc
        .source
        .as_deref()
        .map(Path::display)
        .map(|d| d.to_string())
        .unwrap_or_else(|| format!("<{}>", doc.id));
    let loc = &doc.locations;
    let at = |lines: &[usize], i: usize| lines.get(i).copied().unwrap_or(loc.id);
    let mut out = Vec::new();
    let mut push = |code, line, message: String| {
        out.push(Diagnostic { severity: Severity::Warning, code, message, path: path.clone(), line });
    };

    for (i, kw) in doc.keywords.iter().enumerate() {
        if STOP_LIST.contains(&kw.trim().to_lowercase().as_str()) {
            push(
                LintCode::GenericKeyword,
                at(&loc.keywords, i),
                format!("keyword `{kw}` is too generic to anchor a migration change"),
            );
        }
    }
    for (i, g) in doc.file_globs.iter().enumerate() {
        if !glob_is_conventional(g) {
            push(
                LintCode::UnconventionalGlob,
                at(&loc.file_globs, i),
                format!("glob `{g}` matches no conventional source file name"),
            );
        }
    }
    let words = doc.description.split_whitespace().count();
    if words < MIN_DESCRIPTION_WORDS {
        push(
            LintCode::ShortDescription,
            loc.description,
            format!("description has {words} words; at least {MIN_DESCRIPTION_WORDS} expected"),
        );
    }
    for (i, p) in doc.patterns.iter().enumerate() {
        if Regex::new(p).is_ok_and(|re| re.is_match("")) {
            push(
                LintCode::EmptyMatchPattern,
                at(&loc.patterns, i),
                format!("pattern `{p}` matches the empty string"),
            );
        }
    }
    out
}
