//! Run configuration file (TOML) and flag overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use migbench_core::diff::{LoadError, ServiceRecord};
use migbench_core::evaluator::DEFAULT_TAU;
use migbench_core::matcher::{EvidenceMode, MapOptions};
use migbench_core::synth::{BackendKind, RemoteBackend, Rulebook, RulebookBackend, StaticBackend};
use migbench_core::{KbSet, Synthesizer};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Static,
    Rulebook,
    Remote,
}

impl From<Backend> for BackendKind {
    fn from(b: Backend) -> Self {
        match b {
            Backend::Static => BackendKind::Static,
            Backend::Rulebook => BackendKind::Rulebook,
            Backend::Remote => BackendKind::Remote,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    #[serde(default = "default_backend")]
    pub backend: Backend,
    /// Replaces the bundled rulebook.
    pub rulebook: Option<PathBuf>,
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the bearer token.
    pub token_env: Option<String>,
    #[serde(default = "default_max_concurrent")]
    pub max_concurrent: usize,
    /// Skip descriptions the backend cannot turn into patterns.
    #[serde(default)]
    pub skip_failures: bool,
}

fn default_backend() -> Backend {
    Backend::Rulebook
}

fn default_max_concurrent() -> usize {
    4
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            backend: default_backend(),
            rulebook: None,
            endpoint: None,
            token_env: None,
            max_concurrent: default_max_concurrent(),
            skip_failures: false,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Directory for suite.json, feedback.json and mapping.json.
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kb_root: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_context")]
    pub context: usize,
    #[serde(default)]
    pub evidence: EvidenceMode,
    pub jobs: Option<usize>,
    pub noisy_factor: Option<f64>,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, rename = "service")]
    pub services: Vec<ServiceRecord>,
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

fn default_context() -> usize {
    3
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kb_root: None,
            cache_dir: None,
            tau: default_tau(),
            context: default_context(),
            evidence: EvidenceMode::default(),
            jobs: None,
            noisy_factor: None,
            synth: SynthSection::default(),
            output: OutputSection::default(),
            services: Vec::new(),
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    /// Reads a config file; relative paths are taken from its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.kb_root, &mut cfg.cache_dir, &mut cfg.synth.rulebook, &mut cfg.output.dir]
            .into_iter()
            .flatten()
        {
            resolve(base, p);
        }
        for s in &mut cfg.services {
            resolve(base, &mut s.source);
        }
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            bail!("tau must lie in [0, 1], got {}", self.tau);
        }
        if let Some(root) = &self.kb_root {
            if !root.is_dir() {
                bail!("kb_root {} is not a directory", root.display());
            }
        }
        for s in &self.services {
            if !s.source.exists() {
                return Err(LoadError::UnreadableSource { path: s.source.clone(), reason: "no such file or directory".into() })
                    .with_context(|| format!("service `{}`", s.service_id));
            }
        }
        Ok(())
    }

    pub fn kb_root(&self) -> Result<&Path> {
        self.kb_root.as_deref().context("no KB root: pass --kb-root or set kb_root in the config")
    }

    pub fn map_options(&self) -> MapOptions {
        MapOptions { evidence: self.evidence, skip_synth_failures: self.synth.skip_failures }
    }

    pub fn synthesizer(&self, kbs: &KbSet) -> Result<Synthesizer> {
        let s = &self.synth;
        let backend: Box<dyn migbench_core::synth::Backend> = match s.backend {
            Backend::Static => Box::new(StaticBackend::from_kbs(kbs)),
            Backend::Rulebook => match &s.rulebook {
                Some(p) => Box::new(RulebookBackend::new(
                    Rulebook::load(p).map_err(anyhow::Error::msg).with_context(|| format!("rulebook {}", p.display()))?,
                )),
                None => Box::new(RulebookBackend::bundled()),
            },
            Backend::Remote => {
                let endpoint = s.endpoint.clone().context("the remote backend needs synth.endpoint")?;
                let token = match &s.token_env {
                    Some(var) => Some(std::env::var(var).with_context(|| format!("token variable {var} is not set"))?),
                    None => None,
                };
                Box::new(RemoteBackend::new(endpoint, token, s.max_concurrent.max(1)))
            }
        };
        Ok(match &self.cache_dir {
            Some(dir) => Synthesizer::with_cache_dir(backend, dir),
            None => Synthesizer::new(backend),
        })
    }
}
