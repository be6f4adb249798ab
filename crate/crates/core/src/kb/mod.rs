//! Knowledge Base documents: parsing, loading, linting.

mod lint;
mod parse;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::digest::FieldHasher;

pub use lint::{lint_kb, Diagnostic, LintCode, Severity};
pub use parse::{canonicalize, parse_kb_document};

pub const KB_EXTENSION: &str = ".kb.md";

/// Line numbers (1-based, whole document) of each parsed item.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceMap {
    pub id: usize,
    pub title: usize,
    pub description: usize,
    pub file_globs: Vec<usize>,
    pub keywords: Vec<usize>,
    pub patterns: Vec<usize>,
    pub pattern_descriptions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbDoc {
    pub id: String,
    pub title: String,
    pub description: String,
    pub file_globs: Vec<String>,
    pub keywords: Vec<String>,
    pub pattern_descriptions: Vec<String>,
    pub patterns: Vec<String>,
    /// Lines a synthesized pattern must match.
    pub positive_examples: Vec<String>,
    /// Lines a synthesized pattern must not match.
    pub negative_examples: Vec<String>,
    pub version: String,
    #[serde(skip)]
    pub source: Option<PathBuf>,
    #[serde(skip)]
    pub locations: SourceMap,
}

impl KbDoc {
    pub fn has_matchers(&self) -> bool {
        !(self.keywords.is_empty() && self.patterns.is_empty() && self.pattern_descriptions.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KbError {
    #[error("missing front matter block delimited by `---`")]
    MissingFrontMatter,
    #[error("missing required field `{field}`")]
    MissingField { field: &'static str },
    #[error("KB `{id}` declares no keywords, patterns, or pattern descriptions")]
    NoMatchers { id: String },
    #[error("line {line}: pattern `{pattern}` does not compile: {reason}")]
    BadRegex { pattern: String, line: usize, reason: String },
    #[error("line {line}: invalid glob `{glob}`: {reason}")]
    BadGlob { glob: String, line: usize, reason: String },
    #[error("line {line}: keyword `{keyword}` is shorter than 3 characters")]
    ShortKeyword { keyword: String, line: usize },
    #[error("line {line}: id `{id}` is not a lowercase slug")]
    BadId { id: String, line: usize },
    #[error("line {line}: unknown field `{key}`")]
    UnknownField { key: String, line: usize },
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
}

#[derive(Debug, Error)]
pub enum KbLoadError {
    #[error("cannot read {path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Doc {
        path: PathBuf,
        #[source]
        source: KbError,
    },
    #[error("duplicate KB id `{id}` in {first} and {second}")]
    DuplicateId { id: String, first: PathBuf, second: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KbSet {
    docs: Vec<KbDoc>,
    set_hash: String,
}

impl KbSet {
    /// Builds a set, sorting by id. Fails on duplicate ids.
    pub fn new(mut docs: Vec<KbDoc>) -> Result<Self, KbLoadError> {
        docs.sort_by(|a, b| a.id.cmp(&b.id).then_with(|| a.source.cmp(&b.source)));
        if let Some(w) = docs.windows(2).find(|w| w[0].id == w[1].id) {
            let path = |d: &KbDoc| d.source.clone().unwrap_or_else(|| PathBuf::from("<input>"));
            return Err(KbLoadError::DuplicateId {
                id: w[0].id.clone(),
                first: path(&w[0]),
                second: path(&w[1]),
            });
        }
        let mut h = FieldHasher::new();
        for d in &docs {
            h.field(&d.id).field(&d.version);
        }
        Ok(Self { docs, set_hash: h.finish_hex() })
    }

    pub fn empty() -> Self {
        Self::new(Vec::new()).expect("empty set has no duplicates")
    }

    pub fn docs(&self) -> &[KbDoc] {
        &self.docs
    }

    pub fn set_hash(&self) -> &str {
        &self.set_hash
    }

    pub fn get(&self, id: &str) -> Option<&KbDoc> {
        self.docs
            .binary_search_by(|d| d.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.docs[i])
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.docs.iter().map(|d| d.id.as_str())
    }
}

/// Reads and parses one `.kb.md` file, recording its path.
pub fn load_kb_file(path: &Path) -> Result<KbDoc, KbLoadError> {
    let text = fs::read_to_string(path).map_err(|e| KbLoadError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut doc = parse_kb_document(&text).map_err(|source| KbLoadError::Doc {
        path: path.to_path_buf(),
        source,
    })?;
    doc.source = Some(path.to_path_buf());
    Ok(doc)
}

/// Loads every `*.kb.md` under `root`, recursively.
pub fn load_kb_set(root: &Path) -> Result<KbSet, KbLoadError> {
    let meta = fs::metadata(root).map_err(|e| KbLoadError::Io {
        path: root.to_path_buf(),
        reason: e.to_string(),
    })?;
    if !meta.is_dir() {
        return Err(KbLoadError::Io { path: root.to_path_buf(), reason: "not a directory".into() });
    }
    let mut paths = Vec::new();
    for entry in WalkDir::new(root) {
        let entry = entry.map_err(|e| KbLoadError::Io {
            path: root.to_path_buf(),
            reason: e.to_string(),
        })?;
        if entry.file_type().is_file() && entry.file_name().to_string_lossy().ends_with(KB_EXTENSION) {
            paths.push(entry.into_path());
        }
    }
    paths.sort();
    let docs = paths
        .par_iter()
        .map(|p| load_kb_file(p))
        .collect::<Result<Vec<_>, _>>()?;
    KbSet::new(docs)
}
