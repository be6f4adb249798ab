//! Path globs used to gate which files a KB document applies to.
//!
//! Dialect: `*` matches within one path segment, `**` spans segments, `?`
//! matches one character, `[...]` is a character class.

use globset::{Glob, GlobBuilder, GlobSet, GlobSetBuilder};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("invalid glob `{glob}`: {reason}")]
pub struct GlobError {
    pub glob: String,
    pub reason: String,
}

fn compile(pattern: &str) -> Result<Glob, GlobError> {
    GlobBuilder::new(pattern)
        .literal_separator(true)
        .backslash_escape(true)
        .build()
        .map_err(|e| GlobError {
            glob: pattern.to_string(),
            reason: e.kind().to_string(),
        })
}

/// A compiled list of globs. An empty list accepts every path.
#[derive(Debug, Clone)]
pub struct PathGate {
    set: Option<GlobSet>,
}

impl PathGate {
    pub fn new<S: AsRef<str>>(globs: &[S]) -> Result<Self, GlobError> {
        if globs.is_empty() {
            return Ok(Self { set: None });
        }
        let mut builder = GlobSetBuilder::new();
        for g in globs {
            builder.add(compile(g.as_ref())?);
        }
        let set = builder.build().map_err(|e| GlobError {
            glob: String::new(),
            reason: e.to_string(),
        })?;
        Ok(Self { set: Some(set) })
    }

    pub fn accept_all() -> Self {
        Self { set: None }
    }

    pub fn allows(&self, path: &str) -> bool {
        match &self.set {
            None => true,
            Some(set) => set.is_match(path),
        }
    }
}

/// Checks a single glob for syntax errors.
pub fn validate(pattern: &str) -> Result<(), GlobError> {
    compile(pattern).map(|_| ())
}

/// True if `pattern` matches `path` under the gate dialect.
pub fn matches(pattern: &str, path: &str) -> Result<bool, GlobError> {
    Ok(compile(pattern)?.compile_matcher().is_match(path))
}
