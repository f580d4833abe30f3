//! Manifest, hashing and atomic artifact writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "alignflow";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything that determines the artifacts. The worker count is left out:
/// results do not depend on it.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    /// The resolved run config, or the case name for `reproduce`.
    pub config: Value,
    pub hash: String,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: Value) -> Self {
        let body = json!({
            "tool": TOOL,
            "version": VERSION,
            "command": command,
            "seed": seed,
            "config": config,
        });
        let hash = hex::encode(Sha256::digest(body.to_string().as_bytes()));
        Self {
            tool: TOOL,
            version: VERSION,
            command: command.into(),
            seed,
            config,
            hash,
        }
    }
}

/// Writes artifacts into one directory, each stamped with the manifest hash.
pub struct Sink {
    dir: PathBuf,
    hash: String,
    written: Vec<PathBuf>,
}

impl Sink {
    pub fn create(dir: &Path, manifest: &Manifest) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let mut sink = Self {
            dir: dir.to_path_buf(),
            hash: manifest.hash.clone(),
            written: Vec::new(),
        };
        sink.put("manifest.json", &pretty(manifest)?)?;
        Ok(sink)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// `{"manifest_hash": ..., key: value}`.
    pub fn json<T: Serialize>(&mut self, name: &str, key: &str, value: &T) -> Result<()> {
        let doc = json!({ "manifest_hash": self.hash, key: value });
        self.put(name, &pretty(&doc)?)
    }

    /// A CSV file whose first line is `# manifest_hash=<hash>`.
    pub fn csv<R: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = R>) -> Result<()> {
        let mut buf = format!("# manifest_hash={}\n", self.hash).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        self.put(name, &buf)
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }
}

fn pretty<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v)?;
    out.push(b'\n');
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_depends_on_config_and_seed_only() {
        let a = Manifest::new("simulate", 1, json!({"x": 1}));
        assert_eq!(a.hash, Manifest::new("simulate", 1, json!({"x": 1})).hash);
        assert_ne!(a.hash, Manifest::new("simulate", 2, json!({"x": 1})).hash);
        assert_ne!(a.hash, Manifest::new("limit", 1, json!({"x": 1})).hash);
        assert_ne!(a.hash, Manifest::new("simulate", 1, json!({"x": 2})).hash);
        assert_eq!(a.hash.len(), 64);
    }

    #[test]
    fn artifacts_carry_the_hash_and_leave_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let m = Manifest::new("simulate", 0, json!(null));
        let mut s = Sink::create(dir.path(), &m).unwrap();
        s.json("a.json", "value", &[1.0, 2.0]).unwrap();
        s.csv("b.csv", [(1, 2.5), (2, 3.5)]).unwrap();
        let a: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
        assert_eq!(a["manifest_hash"], m.hash);
        let b = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
        assert_eq!(b.lines().next().unwrap(), format!("# manifest_hash={}", m.hash));
        assert_eq!(b.lines().nth(1).unwrap(), "1,2.5");
        let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 3);
        assert_eq!(s.written().len(), 3);
    }
}
