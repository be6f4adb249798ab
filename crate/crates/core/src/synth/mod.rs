//! Regex synthesis from natural-language pattern descriptions.

mod cache;
mod remote;
mod rulebook;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::FieldHasher;
use crate::kb::{KbDoc, KbSet};

pub use cache::SynthCache;
pub use remote::{HttpResponse, HttpTransport, RemoteBackend, UreqTransport};
pub use rulebook::{normalize_description, Rulebook, RulebookBackend, BUNDLED_RULEBOOK};

pub const MAX_PATTERN_LEN: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BackendKind {
    Static,
    Rulebook,
    Remote,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Static => "static",
            Self::Rulebook => "rulebook",
            Self::Remote => "remote",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthRequest {
    pub kb_id: String,
    pub description: String,
    #[serde(default)]
    pub positive_examples: Vec<String>,
    #[serde(default)]
    pub negative_examples: Vec<String>,
}

impl SynthRequest {
    pub fn for_kb(doc: &KbDoc, description: &str) -> Self {
        Self {
            kb_id: doc.id.clone(),
            description: description.to_string(),
            positive_examples: doc.positive_examples.clone(),
            negative_examples: doc.negative_examples.clone(),
        }
    }

    /// Content digest of the request alone.
    pub fn digest(&self) -> String {
        let mut h = FieldHasher::new();
        self.hash_into(&mut h);
        h.finish_hex()
    }

    fn hash_into(&self, h: &mut FieldHasher) {
        h.field(&self.kb_id).field(&self.description);
        h.field(self.positive_examples.len().to_string());
        for p in &self.positive_examples {
            h.field(p);
        }
        h.field(self.negative_examples.len().to_string());
        for n in &self.negative_examples {
            h.field(n);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthResult {
    pub patterns: Vec<String>,
    pub backend: BackendKind,
    pub cached: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationReason {
    DoesNotCompile,
    TooLong,
    MatchesEmpty,
    MatchesNegative,
    MissesPositive,
}

impl fmt::Display for ValidationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::DoesNotCompile => "does not compile",
            Self::TooLong => "exceeds 512 characters",
            Self::MatchesEmpty => "matches the empty string",
            Self::MatchesNegative => "matches a negative example",
            Self::MissesPositive => "positive example matched by no pattern",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("request for `{kb_id}` has an empty description")]
    EmptyDescription { kb_id: String },
    #[error("no rule for description `{description}`")]
    NoRule { description: String },
    #[error("remote synthesizer returned HTTP {status}: {excerpt}")]
    RemoteError { status: u16, excerpt: String },
    #[error("remote synthesizer unreachable: {0}")]
    Transport(String),
    #[error("remote synthesizer returned an unusable pattern `{source_text}`: {reason}")]
    BadRemotePattern { source_text: String, reason: String },
    #[error("validation failed: pattern {} {reason}{}", pattern.as_deref().map(|p| format!("`{p}`")).unwrap_or_else(|| "<none>".into()), example.as_deref().map(|e| format!(" (example `{e}`)")).unwrap_or_default())]
    ValidationFailure {
        pattern: Option<String>,
        example: Option<String>,
        reason: ValidationReason,
    },
    #[error("synth cache: {0}")]
    Cache(String),
}

fn failure(pattern: Option<&str>, example: Option<&str>, reason: ValidationReason) -> SynthError {
    SynthError::ValidationFailure {
        pattern: pattern.map(str::to_string),
        example: example.map(str::to_string),
        reason,
    }
}

/// Checks sanity limits, then examples. Reports the first offending pair.
pub fn validate_patterns<P, L>(patterns: &[P], pos: &[L], neg: &[L]) -> Result<(), SynthError>
where
    P: AsRef<str>,
    L: AsRef<str>,
{
    let mut compiled = Vec::with_capacity(patterns.len());
    for p in patterns {
        let p = p.as_ref();
        let re = Regex::new(p).map_err(|_| failure(Some(p), None, ValidationReason::DoesNotCompile))?;
        if p.chars().count() > MAX_PATTERN_LEN {
            return Err(failure(Some(p), None, ValidationReason::TooLong));
        }
        if re.is_match("") {
            return Err(failure(Some(p), None, ValidationReason::MatchesEmpty));
        }
        compiled.push((p, re));
    }
    for line in neg {
        let line = line.as_ref();
        if let Some((p, _)) = compiled.iter().find(|(_, re)| re.is_match(line)) {
            return Err(failure(Some(p), Some(line), ValidationReason::MatchesNegative));
        }
    }
    for line in pos {
        let line = line.as_ref();
        if !compiled.iter().any(|(_, re)| re.is_match(line)) {
            return Err(failure(None, Some(line), ValidationReason::MissesPositive));
        }
    }
    Ok(())
}

/// A source of candidate patterns. Validation and caching happen in
/// [`Synthesizer`].
pub trait Backend: Send + Sync {
    fn kind(&self) -> BackendKind;
    /// Folded into the cache key so a changed backend never replays stale records.
    fn identity(&self) -> String;
    fn propose(&self, req: &SynthRequest) -> Result<Vec<String>, SynthError>;
}

/// Returns the KB's explicit patterns unchanged.
#[derive(Debug, Clone, Default)]
pub struct StaticBackend {
    patterns: BTreeMap<String, Vec<String>>,
}

impl StaticBackend {
    pub fn from_kbs(kbs: &KbSet) -> Self {
        Self {
            patterns: kbs.docs().iter().map(|d| (d.id.clone(), d.patterns.clone())).collect(),
        }
    }
}

impl Backend for StaticBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Static
    }

    fn identity(&self) -> String {
        let mut h = FieldHasher::new();
        for (id, pats) in &self.patterns {
            h.field(id).field(pats.len().to_string());
            for p in pats {
                h.field(p);
            }
        }
        h.finish_hex()
    }

    fn propose(&self, req: &SynthRequest) -> Result<Vec<String>, SynthError> {
        match self.patterns.get(&req.kb_id) {
            Some(p) if !p.is_empty() => Ok(p.clone()),
            _ => Err(SynthError::NoRule { description: req.description.clone() }),
        }
    }
}

/// Backend plus cache plus validation.
pub struct Synthesizer {
    backend: Box<dyn Backend>,
    cache: SynthCache,
}

impl Synthesizer {
    pub fn new(backend: Box<dyn Backend>) -> Self {
        Self { backend, cache: SynthCache::in_memory() }
    }

    /// Persists records under `<dir>/<backend>/<digest>`.
    pub fn with_cache_dir(backend: Box<dyn Backend>, dir: impl Into<PathBuf>) -> Self {
        Self { backend, cache: SynthCache::on_disk(dir.into()) }
    }

    pub fn kind(&self) -> BackendKind {
        self.backend.kind()
    }

    pub fn cache_key(&self, req: &SynthRequest) -> String {
        let mut h = FieldHasher::new();
        h.field(self.backend.kind().as_str()).field(self.backend.identity());
        req.hash_into(&mut h);
        h.finish_hex()
    }

    pub fn synthesize(&self, req: &SynthRequest) -> Result<SynthResult, SynthError> {
        if req.description.trim().is_empty() {
            return Err(SynthError::EmptyDescription { kb_id: req.kb_id.clone() });
        }
        let kind = self.backend.kind();
        let key = self.cache_key(req);
        if let Some(patterns) = self.cache.get(kind, &key)? {
            match validate_patterns(&patterns, &req.positive_examples, &req.negative_examples) {
                Ok(()) => {
                    log::info!("synth cache hit for {} `{}`", req.kb_id, req.description);
                    return Ok(SynthResult { patterns, backend: kind, cached: true });
                }
                Err(e) => log::warn!("discarding cached record {key}: {e}"),
            }
        }
        let patterns = self.backend.propose(req)?;
        if let Some(bad) = patterns.iter().find(|p| Regex::new(p).is_err()) {
            if kind == BackendKind::Remote {
                return Err(SynthError::BadRemotePattern {
                    source_text: bad.clone(),
                    reason: Regex::new(bad).err().map(|e| e.to_string()).unwrap_or_default(),
                });
            }
        }
        validate_patterns(&patterns, &req.positive_examples, &req.negative_examples)?;
        self.cache.put(kind, &key, req, &patterns)?;
        Ok(SynthResult { patterns, backend: kind, cached: false })
    }
}

impl fmt::Debug for Synthesizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Synthesizer").field("backend", &self.backend.kind()).finish()
    }
}
