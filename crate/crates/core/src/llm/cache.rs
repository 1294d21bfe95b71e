use std::collections::HashMap;
use std::path::PathBuf;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::BackendReply;

#[derive(Serialize, Deserialize)]
struct Entry {
    content: String,
    model: String,
}

/// Response cache keyed by [`super::cache_key`]. Entries live in memory and,
/// when a directory is given, are also written there as `<key>.json`.
#[derive(Debug, Default)]
pub struct ResponseCache {
    mem: Mutex<HashMap<String, BackendReply>>,
    dir: Option<PathBuf>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        ResponseCache::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(ResponseCache {
            mem: Mutex::new(HashMap::new()),
            dir: Some(dir),
        })
    }

    pub fn get(&self, key: &str) -> Option<BackendReply> {
        if let Some(hit) = self.mem.lock().get(key) {
            return Some(hit.clone());
        }
        let path = self.dir.as_ref()?.join(format!("{key}.json"));
        let entry: Entry = serde_json::from_slice(&std::fs::read(path).ok()?).ok()?;
        let reply = BackendReply {
            content: entry.content,
            model: entry.model,
        };
        self.mem.lock().insert(key.to_string(), reply.clone());
        Some(reply)
    }

    pub fn put(&self, key: String, reply: BackendReply) {
        if let Some(dir) = &self.dir {
            let entry = Entry {
                content: reply.content.clone(),
                model: reply.model.clone(),
            };
            let path = dir.join(format!("{key}.json"));
            if let Err(e) = std::fs::write(&path, serde_json::to_vec(&entry).expect("entry serializes")) {
                tracing::warn!(path = %path.display(), error = %e, "could not persist cache entry");
            }
        }
        self.mem.lock().insert(key, reply);
    }

    pub fn len(&self) -> usize {
        self.mem.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
