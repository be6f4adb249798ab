use std::collections::BTreeMap;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::Deserialize;

use super::{Backend, BackendKind, SynthError, SynthRequest};
use crate::digest::sha256_hex;

pub const BUNDLED_RULEBOOK: &str = include_str!("../../data/rulebook.toml");

static BUNDLED: LazyLock<Rulebook> = LazyLock::new(|| Rulebook::parse(BUNDLED_RULEBOOK).expect("bundled rulebook is valid"));

/// Lowercase, punctuation to spaces, whitespace collapsed.
pub fn normalize_description(text: &str) -> String {
    let mapped: String = text
        .chars()
        .map(|c| if c.is_alphanumeric() { c.to_lowercase().next().unwrap_or(c) } else { ' ' })
        .collect();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Deserialize)]
struct RawRule {
    descriptions: Vec<String>,
    patterns: Vec<String>,
}

#[derive(Deserialize)]
struct RawBook {
    #[serde(default)]
    rule: Vec<RawRule>,
}

#[derive(Debug, Clone)]
pub struct Rulebook {
    rules: BTreeMap<String, Vec<String>>,
    digest: String,
}

impl Rulebook {
    pub fn parse(text: &str) -> Result<Self, String> {
        let raw: RawBook = toml::from_str(text).map_err(|e| e.to_string())?;
        let mut rules = BTreeMap::new();
        for (i, r) in raw.rule.into_iter().enumerate() {
            if r.patterns.is_empty() {
                return Err(format!("rule {} has no patterns", i + 1));
            }
            for p in &r.patterns {
                Regex::new(p).map_err(|e| format!("rule {}: pattern `{p}`: {e}", i + 1))?;
            }
            for d in &r.descriptions {
                let key = normalize_description(d);
                if rules.insert(key.clone(), r.patterns.clone()).is_some() {
                    return Err(format!("description `{key}` listed twice"));
                }
            }
        }
        Ok(Self { rules, digest: sha256_hex(text) })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn bundled() -> Self {
        BUNDLED.clone()
    }

    pub fn lookup(&self, description: &str) -> Option<&[String]> {
        self.rules.get(&normalize_description(description)).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct RulebookBackend {
    book: Rulebook,
}

impl RulebookBackend {
    pub fn new(book: Rulebook) -> Self {
        Self { book }
    }

    pub fn bundled() -> Self {
        Self::new(Rulebook::bundled())
    }
}

impl Backend for RulebookBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Rulebook
    }

    fn identity(&self) -> String {
        self.book.digest.clone()
    }

    fn propose(&self, req: &SynthRequest) -> Result<Vec<String>, SynthError> {
        self.book
            .lookup(&req.description)
            .map(<[String]>::to_vec)
            .ok_or_else(|| SynthError::NoRule { description: req.description.clone() })
    }
}
