use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{BackendKind, SynthError, SynthRequest};

#[derive(Serialize, Deserialize)]
struct Record {
    key: String,
    kb_id: String,
    description: String,
    patterns: Vec<String>,
}

/// Memory layer in front of optional content-addressed files.
#[derive(Debug, Default)]
pub struct SynthCache {
    memory: Mutex<HashMap<(BackendKind, String), Vec<String>>>,
    dir: Option<PathBuf>,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl SynthCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(dir: PathBuf) -> Self {
        Self { memory: Mutex::default(), dir: Some(dir) }
    }

    fn record_path(&self, kind: BackendKind, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(kind.as_str()).join(key))
    }

    pub fn get(&self, kind: BackendKind, key: &str) -> Result<Option<Vec<String>>, SynthError> {
        if let Some(hit) = self.memory.lock().expect("cache lock").get(&(kind, key.to_string())) {
            return Ok(Some(hit.clone()));
        }
        let Some(path) = self.record_path(kind, key) else {
            return Ok(None);
        };
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(SynthError::Cache(format!("{}: {e}", path.display()))),
        };
        match serde_json::from_str::<Record>(&text) {
            Ok(r) if r.key == key => {
                self.memory
                    .lock()
                    .expect("cache lock")
                    .insert((kind, key.to_string()), r.patterns.clone());
                Ok(Some(r.patterns))
            }
            _ => {
                log::warn!("ignoring corrupt cache record {}", path.display());
                Ok(None)
            }
        }
    }

    pub fn put(&self, kind: BackendKind, key: &str, req: &SynthRequest, patterns: &[String]) -> Result<(), SynthError> {
        self.memory
            .lock()
            .expect("cache lock")
            .insert((kind, key.to_string()), patterns.to_vec());
        let Some(path) = self.record_path(kind, key) else {
            return Ok(());
        };
        let io = |e: std::io::Error| SynthError::Cache(format!("{}: {e}", path.display()));
        let parent = path.parent().expect("record has a parent");
        fs::create_dir_all(parent).map_err(io)?;
        let record = Record {
            key: key.to_string(),
            kb_id: req.kb_id.clone(),
            description: req.description.clone(),
            patterns: patterns.to_vec(),
        };
        let body = serde_json::to_string_pretty(&record).expect("record serializes");
        let tmp = parent.join(format!(
            ".{key}.{}.{}.tmp",
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(body.as_bytes()).map_err(io)?;
        f.write_all(b"\n").map_err(io)?;
        drop(f);
        fs::rename(&tmp, &path).map_err(io)
    }
}
