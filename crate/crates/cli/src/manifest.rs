use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commands::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Writes through a temporary file in the same directory and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut f = std::fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

/// Everything needed to re-run a command: its arguments, the resolved
/// configuration and content digests of what it read and wrote.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    pub seed: u64,
    pub config_sha256: String,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null", default)]
    pub details: serde_json::Value,
    pub started_unix: u64,
    pub finished_unix: u64,
}

/// Collects outputs while a command runs and writes `manifest.json` last.
pub struct Recorder {
    out: PathBuf,
    manifest: RunManifest,
}

impl Recorder {
    pub fn new<C: Serialize>(out: &Path, command: &str, args: Vec<String>, seed: u64, config: &C) -> Result<Self, CliError> {
        std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
        let config = serde_json::to_value(config).map_err(|e| CliError::Io(e.to_string()))?;
        let canonical = serde_json::to_vec(&config).map_err(|e| CliError::Io(e.to_string()))?;
        Ok(Self {
            out: out.to_path_buf(),
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                args,
                seed,
                config_sha256: sha256_hex(&canonical),
                config,
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                details: serde_json::Value::Null,
                started_unix: unix_now(),
                finished_unix: 0,
            },
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.manifest.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(())
    }

    /// Writes `bytes` to `name` inside the output directory.
    pub fn output(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.out.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
        }
        write_atomic(&path, bytes)?;
        self.manifest.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(path)
    }

    pub fn details(&mut self, value: serde_json::Value) {
        self.manifest.details = value;
    }

    pub fn finish(mut self) -> Result<RunManifest, CliError> {
        self.manifest.finished_unix = unix_now();
        let json = serde_json::to_vec_pretty(&self.manifest).map_err(|e| CliError::Io(e.to_string()))?;
        write_atomic(&self.out.join("manifest.json"), &json)?;
        Ok(self.manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn manifest_lists_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut rec = Recorder::new(dir.path(), "test", vec![], 3, &serde_json::json!({"a": 1})).unwrap();
        rec.output("x.txt", b"hello").unwrap();
        let m = rec.finish().unwrap();
        assert_eq!(std::fs::read(dir.path().join("x.txt")).unwrap(), b"hello");
        let back: RunManifest =
            serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(back.outputs, m.outputs);
        assert_eq!(back.seed, 3);
        assert!(!dir.path().join(".x.txt.tmp").exists());
    }
}
