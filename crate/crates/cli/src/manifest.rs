//! Run manifests: config hash, seed, version, timestamps, output list.
//! Written atomically (temp file + rename) at the end of a run.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Files created by the current command; removed on failure so no
/// partial outputs survive.
pub struct OutputTracker {
    files: Vec<PathBuf>,
}

impl OutputTracker {
    pub fn new() -> Self {
        OutputTracker { files: Vec::new() }
    }

    pub fn register(&mut self, path: &Path) {
        self.files.push(path.to_path_buf());
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.files
    }

    pub fn remove_all(&self) {
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
    }
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// FNV-1a 64 over the canonical JSON encoding (serde_json orders object
/// keys, so the hash is stable under key reordering in the input).
pub fn config_hash(value: &serde_json::Value) -> String {
    let canonical = value.to_string();
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in canonical.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    format!("{h:016x}")
}

pub struct RunManifest {
    config_hash: String,
    master_seed: u64,
    started: String,
    outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(config: &serde_json::Value, master_seed: u64, started: String) -> Self {
        RunManifest {
            config_hash: config_hash(config),
            master_seed,
            started,
            outputs: Vec::new(),
        }
    }

    pub fn with_outputs(mut self, tracker: &OutputTracker) -> Self {
        self.outputs = tracker
            .paths()
            .iter()
            .map(|p| p.display().to_string())
            .collect();
        self
    }

    pub fn write(&self, path: &Path, tracker: &mut OutputTracker) -> std::io::Result<()> {
        let value = serde_json::json!({
            "schema_version": 1,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "config_hash": self.config_hash,
            "master_seed": self.master_seed,
            "started": self.started,
            "finished": now(),
            "outputs": self.outputs,
        });
        let tmp = path.with_extension("json.tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            writeln!(f, "{}", serde_json::to_string_pretty(&value)?)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        tracker.register(path);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_stable_under_key_reordering() {
        let a: serde_json::Value =
            serde_json::from_str(r#"{"b": 1, "a": {"y": 2, "x": [3, 4]}}"#).unwrap();
        let b: serde_json::Value =
            serde_json::from_str(r#"{"a": {"x": [3, 4], "y": 2}, "b": 1}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        let c: serde_json::Value = serde_json::from_str(r#"{"b": 2, "a": 1}"#).unwrap();
        assert_ne!(config_hash(&a), config_hash(&c));
    }
}
